#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "eci/constraint_spec.hpp"
#include "eci/fgrid.hpp"
#include "eci/manifest.hpp"
#include "eci/metrics.hpp"
#include "eci/model_io.hpp"
#include "eci/pde_systems.hpp"
#include "eci/runtime.hpp"
#include "eci/sampler.hpp"
#include "eci/serialize.hpp"
#include "eci/train.hpp"

namespace fs = std::filesystem;
using namespace eci;

namespace {

std::pair<std::size_t, std::size_t> parse_res(const std::string& s) {
    const auto x = s.find_first_of("xX");
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        std::size_t a_end = 0, b_end = 0;
        const auto a = std::stoul(s.substr(0, x), &a_end);
        const auto b = std::stoul(s.substr(x + 1), &b_end);
        if (a_end != x || b_end != s.size() - x - 1) throw std::invalid_argument(s);
        return {a, b};
    } catch (const std::logic_error&) {
        throw usage_error("--res expects AxB (e.g. 32x32), got '" + s + "'");
    }
}

// key=lo:hi or key=value
void apply_range(ParamRange& r, const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw usage_error("--range expects key=lo:hi, got '" + s + "'");
    const std::string key = s.substr(0, eq), rest = s.substr(eq + 1);
    const auto colon = rest.find(':');
    try {
        const double lo = std::stod(rest.substr(0, colon));
        const double hi = colon == std::string::npos ? lo : std::stod(rest.substr(colon + 1));
        r.set(key, lo, hi);
    } catch (const std::logic_error&) {
        throw usage_error("--range expects numeric bounds, got '" + s + "'");
    }
}

Family family_flag(const std::string& s) {
    try {
        return parse_family(s);
    } catch (const data_error& e) {
        throw usage_error(e.what());
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw data_error("cannot create output directory: " + dir);
}

std::string sibling(const std::string& path, const std::string& suffix) { return path + suffix; }

struct GenArgs {
    std::string system, res = "32x32", out;
    std::size_t n = 512;
    std::uint64_t seed = 0;
    std::vector<std::string> ranges;
};

int cmd_gen_data(const GenArgs& a) {
    const Family f = family_flag(a.system);
    const auto [nx, nt] = parse_res(a.res);
    ParamRange range = ParamRange::defaults(f);
    for (const auto& r : a.ranges) apply_range(range, r);
    const Domain d = family_domain(f, nx, nt);
    RunManifest man("gen-data");
    const Dataset ds = generate_dataset(f, a.n, d, range, a.seed);
    ensure_dir(a.out);
    json draws = json::array();
    for (std::size_t i = 0; i < ds.fields.size(); ++i) {
        const std::string path = (fs::path(a.out) / sample_file_name(i)).string();
        write_fgrid(ds.fields[i], path);
        man.output(path);
        json p = json::object();
        for (const auto& [k, v] : params_to_map(ds.params[i])) p[k] = v;
        draws.push_back(p);
    }
    man.config() = {{"system", to_string(f)}, {"n", a.n}, {"res", a.res}, {"domain", to_json(d)},
                    {"range", to_json(range)}};
    man.seeds()["data"] = a.seed;
    man.doc()["family"] = to_string(f);
    man.doc()["params"] = draws;
    man.write((fs::path(a.out) / "manifest.json").string());
    std::cout << "wrote " << ds.fields.size() << " fields to " << a.out << '\n';
    return 0;
}

struct TrainArgs {
    std::string data, out, noise = "matern", smoothness = "three_halves";
    std::size_t iters = 2000, batch = 8, width = 32, modes = 8, layers = 2, projection = 64, log_interval = 50;
    double lr = 3e-4, length = 0.05;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
    RunManifest man("train");
    const auto fields = read_fgrid_dir(a.data);
    if (fields.empty()) throw data_error("dataset is empty: " + a.data);
    man.input(a.data);
    const Domain d = fields.front().domain();
    NoiseSpec ns;
    ns.kind = parse_noise_kind(a.noise);
    ns.smoothness = parse_smoothness(a.smoothness);
    ns.length = a.length;
    Architecture arch;
    arch.layers = a.layers;
    arch.width = a.width;
    arch.modes0 = arch.modes1 = a.modes;
    arch.projection = a.projection;
    TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.iterations = a.iters;
    cfg.batch_size = a.batch;
    cfg.seed = a.seed;
    cfg.log_interval = a.log_interval;
    SpectralVectorField model(arch, d, ns);
    model.init(a.seed);
    const NoiseSampler sampler(d, ns);
    const TrainReport rep = train(model, fields, sampler, cfg);
    if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) ensure_dir(parent.string());
    save_model(model, a.out);
    const std::string report_path = sibling(a.out, ".report.json");
    write_json_file(to_json(rep), report_path);
    man.output(a.out);
    man.output(report_path);
    man.config() = {{"train", to_json(cfg)}, {"architecture", to_json(arch)}, {"noise", to_json(ns)},
                    {"domain", to_json(d)}, {"parameters", model.parameter_count()}};
    man.seeds()["train"] = a.seed;
    man.write(sibling(a.out, ".manifest.json"));
    std::cout << "trained " << model.parameter_count() << " parameters, final loss " << rep.final_loss << " in "
              << rep.wall_seconds << " s\n";
    return 0;
}

struct SampleArgs {
    std::string model, method = "eci", constraint, res, out, resample = "1";
    std::size_t n = 128, steps = 100, mixing = 5;
    std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a) {
    RunManifest man("sample");
    SamplerConfig cfg;
    cfg.method = parse_method(a.method);
    cfg.euler_steps = a.steps;
    cfg.mixing = a.mixing;
    cfg.seed = a.seed;
    if (a.resample == "none" || a.resample == "0") {
        cfg.resample = std::nullopt;
    } else {
        try {
            cfg.resample = std::stoul(a.resample);
        } catch (const std::logic_error&) {
            throw usage_error("--resample expects a positive integer or 'none'");
        }
    }
    if (cfg.euler_steps < 1 || cfg.mixing < 1) throw usage_error("--steps and --mixing must be >= 1");
    const SpectralVectorField model = load_model(a.model);
    man.input(a.model);
    Domain d = model.domain();
    if (!a.res.empty()) {
        const auto [nx, nt] = parse_res(a.res);
        const std::size_t r[2] = {nx, nt};
        d = d.with_resolution(r);
    }
    Constraint c = Identity{};
    json spec = json(nullptr);
    if (!a.constraint.empty()) {
        spec = read_json_file(a.constraint);
        c = build_constraint(spec, d);
        man.input(a.constraint);
        if (cfg.method == Method::euler)
            std::cerr << "warning: --method euler does not enforce the constraint; CE is reported only\n";
    } else if (cfg.method != Method::euler) {
        std::cerr << "warning: no --constraint given; sampling with the identity constraint\n";
    }
    const NoiseSampler sampler(d, model.noise_spec());
    auto [samples, rep] = sample_batch(model, c, sampler, cfg, a.n);
    ensure_dir(a.out);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string path = (fs::path(a.out) / sample_file_name(i)).string();
        write_fgrid(samples[i], path);
        man.output(path);
    }
    const std::string report_path = (fs::path(a.out) / "report.json").string();
    json rj = to_json(rep);
    rj["ce_mean"] = mean_constraint_error(samples, c);
    write_json_file(rj, report_path);
    man.output(report_path);
    man.config() = {{"sampler", to_json(cfg)}, {"n", a.n}, {"domain", to_json(d)},
                    {"noise", to_json(model.noise_spec())}, {"constraint", spec},
                    {"constraint_hash", a.constraint.empty() ? json(nullptr) : json(io::hash_file(a.constraint))}};
    man.seeds()["sample"] = a.seed;
    man.write((fs::path(a.out) / "manifest.json").string());
    std::cout << "wrote " << samples.size() << " samples to " << a.out << " (mean CE " << rj["ce_mean"].get<double>()
              << ")\n";
    return 0;
}

struct EvalArgs {
    std::string generated, reference, constraint, truth, out;
};

int cmd_eval(const EvalArgs& a) {
    RunManifest man("eval");
    const auto gen = read_fgrid_dir(a.generated);
    const auto ref = read_fgrid_dir(a.reference);
    if (gen.empty()) throw data_error("no FGRID files in " + a.generated);
    if (ref.empty()) throw data_error("no FGRID files in " + a.reference);
    man.input(a.generated);
    man.input(a.reference);
    Constraint c = Identity{};
    if (!a.constraint.empty()) {
        c = build_constraint(read_json_file(a.constraint), gen.front().domain());
        man.input(a.constraint);
    }
    std::optional<GridFunction> truth;
    if (!a.truth.empty()) {
        truth = read_fgrid(a.truth);
        man.input(a.truth);
    }
    const EvalReport rep = evaluate(gen, ref, c, truth);
    if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) ensure_dir(parent.string());
    write_json_file(to_json(rep), a.out);
    man.output(a.out);
    man.config() = {{"generated", a.generated}, {"reference", a.reference}, {"constraint", a.constraint},
                    {"truth", a.truth}};
    man.write(sibling(a.out, ".manifest.json"));
    std::cout << to_json(rep).dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Hard-constrained sampling from functional flow-matching models"};
    app.set_version_flag("--version", std::string(ECI_VERSION));
    app.require_subcommand(1);

    GenArgs g;
    auto* gen = app.add_subcommand("gen-data", "Generate a dataset of analytic PDE solutions");
    gen->add_option("--system", g.system, "stokes, heat, pme or stefan")->required();
    gen->add_option("--n", g.n, "number of fields")->capture_default_str();
    gen->add_option("--res", g.res, "grid resolution AxB (space x time)")->capture_default_str();
    gen->add_option("--range", g.ranges, "override a prior interval, key=lo:hi (repeatable)");
    gen->add_option("--seed", g.seed)->capture_default_str();
    gen->add_option("--out", g.out, "output directory")->required();

    TrainArgs t;
    auto* tr = app.add_subcommand("train", "Train the flow-matching vector field");
    tr->add_option("--data", t.data, "dataset directory")->required();
    tr->add_option("--out", t.out, "model file")->required();
    tr->add_option("--iters", t.iters)->capture_default_str();
    tr->add_option("--batch", t.batch)->capture_default_str();
    tr->add_option("--lr", t.lr)->capture_default_str();
    tr->add_option("--width", t.width)->capture_default_str();
    tr->add_option("--modes", t.modes, "frequency cutoff per axis")->capture_default_str();
    tr->add_option("--layers", t.layers)->capture_default_str();
    tr->add_option("--projection", t.projection, "projection width")->capture_default_str();
    tr->add_option("--noise", t.noise, "matern or white")->capture_default_str();
    tr->add_option("--kernel-length", t.length, "Matern length on normalised coordinates")->capture_default_str();
    tr->add_option("--smoothness", t.smoothness, "half, three_halves or five_halves")->capture_default_str();
    tr->add_option("--log-interval", t.log_interval)->capture_default_str();
    tr->add_option("--seed", t.seed)->capture_default_str();

    SampleArgs s;
    auto* sm = app.add_subcommand("sample", "Draw samples, optionally under a hard constraint");
    sm->add_option("--model", s.model)->required();
    sm->add_option("--method", s.method, "euler, eci or final_projection")->capture_default_str();
    sm->add_option("--constraint", s.constraint, "constraint spec (JSON)");
    sm->add_option("--n", s.n)->capture_default_str();
    sm->add_option("--steps", s.steps, "Euler steps N")->capture_default_str();
    sm->add_option("--mixing", s.mixing, "mixing iterations M")->capture_default_str();
    sm->add_option("--resample", s.resample, "re-sampling interval R, or 'none'")->capture_default_str();
    sm->add_option("--res", s.res, "sampling resolution AxB (default: training resolution)");
    sm->add_option("--seed", s.seed)->capture_default_str();
    sm->add_option("--out", s.out, "output directory")->required();

    EvalArgs e;
    auto* ev = app.add_subcommand("eval", "Compare generated samples with a reference set");
    ev->add_option("--generated", e.generated)->required();
    ev->add_option("--reference", e.reference)->required();
    ev->add_option("--constraint", e.constraint, "constraint spec (JSON)");
    ev->add_option("--truth", e.truth, "FGRID ground truth; enables the log-likelihood");
    ev->add_option("--out", e.out, "report file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return 2;
    }

    try {
        if (*gen) return cmd_gen_data(g);
        if (*tr) return cmd_train(t);
        if (*sm) return cmd_sample(s);
        if (*ev) return cmd_eval(e);
    } catch (const usage_error& ex) {
        std::cerr << "usage error: " << ex.what() << '\n';
        return 2;
    } catch (const numeric_error& ex) {
        std::cerr << "numeric failure: " << ex.what() << '\n';
        return 4;
    } catch (const data_error& ex) {
        std::cerr << "data error: " << ex.what() << '\n';
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 3;
    }
    return 2;
}

#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "eci/fgrid.hpp"
#include "eci/metrics.hpp"
#include "eci/model.hpp"
#include "eci/pde_systems.hpp"
#include "eci/sampler.hpp"
#include "eci/train.hpp"

namespace eci {

using json = nlohmann::json;

inline json to_json(const Domain& d) {
    json axes = json::array();
    for (const auto& a : d.axes()) axes.push_back({{"lower", a.lower}, {"upper", a.upper}, {"resolution", a.resolution}});
    return axes;
}

inline json to_json(const NoiseSpec& n) {
    return {{"kind", to_string(n.kind)},
            {"length", n.length},
            {"variance", n.variance},
            {"smoothness", to_string(n.smoothness)},
            {"jitter", n.jitter}};
}

inline json to_json(const Architecture& a) {
    return {{"layers", a.layers},         {"width", a.width},           {"modes", {a.modes0, a.modes1}},
            {"projection", a.projection}, {"time_embed", a.time_embed}, {"activation", "gelu_tanh"},
            {"init", "spectral N(0,(2/width)^2)/modes; dense kaiming-uniform; zero bias"}};
}

inline json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"iterations", c.iterations}, {"batch_size", c.batch_size},
            {"seed", c.seed},                   {"beta1", c.beta1},           {"beta2", c.beta2},
            {"epsilon", c.epsilon},             {"log_interval", c.log_interval}};
}

inline json to_json(const TrainReport& r) {
    return {{"loss_curve", r.loss_curve}, {"final_loss", r.final_loss}, {"wall_seconds", r.wall_seconds},
            {"seed", r.seed},             {"config", to_json(r.config)}};
}

inline json to_json(const SamplerConfig& c) {
    return {{"method", to_string(c.method)},
            {"euler_steps", c.euler_steps},
            {"mixing", c.mixing},
            {"resample", c.resample ? json(*c.resample) : json(nullptr)},
            {"seed", c.seed}};
}

inline json to_json(const SampleBatchReport& r) {
    return {{"ce", r.ce}, {"noise_seeds", r.noise_seeds}, {"wall_seconds", r.wall_seconds}, {"config", to_json(r.config)}};
}

inline json to_json(const EvalReport& r) {
    return {{"mmse", r.mmse},
            {"smse", r.smse},
            {"ce", r.ce},
            {"fpd", r.fpd},
            {"ll", r.ll ? json(*r.ll) : json(nullptr)},
            {"n_generated", r.n_generated},
            {"n_reference", r.n_reference},
            {"extractor", r.extractor}};
}

inline json to_json(const ParamRange& r) {
    json j = json::object();
    for (const auto& [k, iv] : r.intervals) j[k] = {iv.lo, iv.hi};
    return j;
}

// FGRID files of a directory in lexicographic order.
inline std::vector<std::string> list_fgrid_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw data_error("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".fgrid") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

inline std::vector<GridFunction> read_fgrid_dir(const std::string& dir) {
    std::vector<GridFunction> out;
    for (const auto& f : list_fgrid_files(dir)) out.push_back(read_fgrid(f));
    return out;
}

inline std::string sample_file_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%05zu.fgrid", i);
    return buf;
}

} // namespace eci

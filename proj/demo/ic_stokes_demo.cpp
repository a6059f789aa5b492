// Small end-to-end run: Stokes data, a short training run, then samples
// pinned to one initial condition with three samplers.
#include <cstdio>

#include "eci/constraints.hpp"
#include "eci/metrics.hpp"
#include "eci/pde_systems.hpp"
#include "eci/runtime.hpp"
#include "eci/sampler.hpp"
#include "eci/train.hpp"

using namespace eci;

int main() {
    tune_allocator();
    const Domain d = family_domain(Family::stokes, 16, 16);
    const auto data = generate_dataset(Family::stokes, 64, d, ParamRange::defaults(Family::stokes), 1);

    Architecture arch;
    arch.width = 8;
    arch.modes0 = arch.modes1 = 4;
    arch.projection = 16;
    NoiseSpec noise;
    noise.length = 0.001;
    SpectralVectorField model(arch, d, noise);
    model.init(7);

    TrainConfig tc;
    tc.iterations = 2000;
    tc.batch_size = 8;
    tc.learning_rate = 1e-3;
    tc.log_interval = 200;
    const NoiseSampler prior(d, noise);
    const auto rep = train(model, data.fields, prior, tc);
    std::printf("trained %zu params, loss %.4f -> %.4f in %.1fs\n", model.parameter_count(), rep.loss_curve.front(),
                rep.final_loss, rep.wall_seconds);

    auto k5 = ParamRange::defaults(Family::stokes);
    k5.set("k", 5, 5);
    const auto ref = generate_dataset(Family::stokes, 32, d, k5, 2);
    const Constraint ic = make_ic(d, ref.params[0]);

    for (Method m : {Method::euler, Method::final_projection, Method::eci}) {
        SamplerConfig sc;
        sc.method = m;
        sc.euler_steps = 10;
        sc.mixing = 1;
        sc.resample = std::nullopt;
        sc.seed = 3;
        auto [samples, br] = sample_batch(model, ic, prior, sc, 32);
        const auto ev = evaluate(samples, ref.fields, ic);
        std::printf("%-17s mmse %.4f  smse %.4f  ce %.2e  fpd %.3f\n", to_string(m).c_str(), ev.mmse, ev.smse, ev.ce,
                    ev.fpd);
    }
}

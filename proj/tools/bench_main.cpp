// Times the registration kernels serial vs OpenMP on a generated dataset and
// checks that both execution modes produce identical results.

#include <chrono>
#include <cstdio>
#include <string>

#include "align/registration.hpp"
#include "align/simulate.hpp"
#include "align/tuning.hpp"

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

align::FitConfig bench_config() {
    align::FitConfig config;
    config.specs = align::parse_moment_specs("max:r=100,min:r=100");
    config.family = align::WarpFamily::standardized;
    config.lambdas = {0.2, 1e5, 1.0};
    config.max_outer_iters = 12;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    int n_curves = 10;
    int repeats = 3;
    if (argc > 1) n_curves = std::stoi(argv[1]);
    if (argc > 2) repeats = std::stoi(argv[2]);

    align::Scenario scenario;
    scenario.kind = align::ScenarioKind::three;
    scenario.n_curves = n_curves;
    scenario.seed = 42;
    const align::SimOutput sim = align::simulate(scenario);

    std::printf("registration benchmark: %d curves, %d repeats\n", n_curves, repeats);
    double serial_best = 1e300, parallel_best = 1e300;
    align::FitResult serial_fit, parallel_fit;
    for (int rep = 0; rep < repeats; ++rep) {
        align::FitConfig config = bench_config();
        config.exec = align::ExecMode::serial;
        auto start = std::chrono::steady_clock::now();
        serial_fit = align::register_curves(sim.data, config);
        serial_best = std::min(serial_best, seconds_since(start));

        config.exec = align::ExecMode::openmp;
        start = std::chrono::steady_clock::now();
        parallel_fit = align::register_curves(sim.data, config);
        parallel_best = std::min(parallel_best, seconds_since(start));
    }

    double max_diff = 0.0;
    for (size_t i = 0; i < serial_fit.params.size(); ++i) {
        max_diff = std::max(max_diff,
                            (serial_fit.params[i].theta - parallel_fit.params[i].theta).cwiseAbs().maxCoeff());
    }
    std::printf("serial   : %8.3f s  (Sync %.3f%%, sigma %.5f)\n", serial_best, serial_fit.metrics.sync,
                serial_fit.metrics.sigma);
    std::printf("openmp   : %8.3f s  (Sync %.3f%%, sigma %.5f)\n", parallel_best,
                parallel_fit.metrics.sync, parallel_fit.metrics.sigma);
    std::printf("speedup  : %8.2fx\n", serial_best / parallel_best);
    std::printf("max param difference serial vs openmp: %g %s\n", max_diff,
                max_diff == 0.0 ? "(identical)" : "(MISMATCH)");
    return max_diff == 0.0 ? 0 : 1;
}

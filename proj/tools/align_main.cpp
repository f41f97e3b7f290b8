#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "align/error.hpp"
#include "align/io.hpp"

namespace {

void add_fit_options(CLI::App* cmd, align::RunConfig& config) {
    cmd->add_option("input", config.input, "curve CSV (long or wide)")->required();
    cmd->add_option("-o,--out", config.out_dir, "output directory");
    cmd->add_option("--format", config.format, "input format: auto|long|wide");
    cmd->add_option("--features", config.features,
                    "moment specs, e.g. max:r=100,min:r=100 or deriv:m=1:k=1,2");
    cmd->add_option("--warp", config.warp, "warp family: identity|linear|free|standardized");
    cmd->add_option("--amp-dim", config.fit.amp_dim, "amplitude basis dimension");
    cmd->add_option("--warp-dim", config.fit.warp_dim, "warp basis dimension");
    cmd->add_option("--amp-degree", config.fit.amp_degree, "amplitude basis degree");
    cmd->add_option("--warp-degree", config.fit.warp_degree, "warp basis degree");
    cmd->add_option("--lambda-sync", config.fit.lambdas.sync, "shrinkage penalty weight");
    cmd->add_option("--lambda-mom", config.fit.lambdas.mom, "moment penalty weight");
    cmd->add_option("--lambda-w", config.fit.lambdas.w, "warp distortion penalty weight");
    cmd->add_option("--smooth-roughness", config.fit.smooth_roughness, "presmoothing roughness");
    cmd->add_option("--max-outer", config.fit.max_outer_iters, "outer iteration cap");
    cmd->add_option("--outer-tol", config.fit.outer_tol, "relative Q change tolerance");
    cmd->add_option("--inner-max", config.fit.inner.max_iterations, "inner solver iteration cap");
    cmd->add_option("--inner-tol", config.fit.inner.grad_tol, "inner gradient tolerance");
    cmd->add_option("--quad-points", config.fit.quad_points,
                    "quadrature grid size (0 = ALIGN_QUAD_POINTS or 2001)");
    cmd->add_option("--output-points", config.fit.output_points, "output grid size");
    cmd->add_option("--seed", config.seed, "seed echoed into artifacts");
    cmd->add_flag("--plots", config.plots, "emit report.svg");
    cmd->add_option("--exec", [&config](const std::vector<std::string>& v) {
        config.fit.exec = v[0] == "serial" ? align::ExecMode::serial : align::ExecMode::openmp;
        return true;
    }, "execution mode: serial|openmp");
    cmd->add_option("--anneal", [&config](const std::vector<std::string>& v) {
        if (v[0] == "off") {
            config.fit.anneal.reset();
            return true;
        }
        align::AnnealSchedule schedule;
        if (v[0] != "on") {
            const auto comma1 = v[0].find(',');
            const auto comma2 = v[0].rfind(',');
            if (comma1 == std::string::npos || comma2 <= comma1) return false;
            schedule.phase1_iters = std::stoi(v[0].substr(0, comma1));
            schedule.mom_multiplier = std::stod(v[0].substr(comma1 + 1, comma2 - comma1 - 1));
            schedule.sync_multiplier = std::stod(v[0].substr(comma2 + 1));
        }
        config.fit.anneal = schedule;
        return true;
    }, "two-phase lambda schedule: on|off|iters,mom_mult,sync_mult");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"curve registration by moment matching"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file (flags win on conflict)");

    align::RunConfig config;

    CLI::App* fit = app.add_subcommand("fit", "register curves");
    add_fit_options(fit, config);
    fit->add_option("--method", config.method, "moments|landmark|cmr");
    fit->add_option("--landmarks", config.landmarks, "landmark events, e.g. max,min");

    CLI::App* tune = app.add_subcommand("tune", "constrained grid search over the lambdas");
    add_fit_options(tune, config);
    tune->add_option("--sigma-max", config.grid.sigma_max, "upper bound on sigma");
    tune->add_option("--pw-max", config.grid.pw_max, "upper bound on mean P(W)");
    tune->add_option("--grid-sync", config.grid.sync_values, "lambda_sync axis")->delimiter(',');
    tune->add_option("--grid-mom", config.grid.mom_values, "lambda_mom axis")->delimiter(',');
    tune->add_option("--grid-w", config.grid.w_values, "lambda_w axis")->delimiter(',');

    CLI::App* simulate = app.add_subcommand("simulate", "generate a benchmark dataset");
    simulate->add_option("--scenario", [&config](const std::vector<std::string>& v) {
        config.scenario.kind = align::parse_scenario_kind(v[0]);
        return true;
    }, "one|two|three|four")->required();
    simulate->add_option("--seed", config.seed, "RNG seed");
    simulate->add_option("--n-curves", config.scenario.n_curves, "curves per dataset");
    simulate->add_option("--n-points", config.scenario.n_points, "samples per curve");
    simulate->add_option("--noise-sd", config.scenario.noise_sd, "scenario four noise");
    simulate->add_option("--drift-slope", config.scenario.drift_slope, "scenario four drift range");
    simulate->add_option("--warp-amplitude", config.scenario.warp_amplitude, "gamma range");
    simulate->add_option("-o,--out", config.out_dir, "output directory")->required();

    CLI::App* baseline = app.add_subcommand("baseline", "landmark / CMR comparison methods");
    add_fit_options(baseline, config);
    CLI::Option* baseline_method =
        baseline->add_option("--method", config.method, "landmark|cmr|moments");
    baseline->add_option("--landmarks", config.landmarks, "landmark events, e.g. max,min");

    CLI::App* metrics = app.add_subcommand("metrics", "recompute metrics from emitted artifacts");
    metrics->add_option("-o,--out", config.out_dir, "artifact directory")->required();
    metrics->add_option("input", config.input, "curve CSV (defaults to the recorded input path)");

    CLI11_PARSE(app, argc, argv);

    config.command = app.get_subcommands().front()->get_name();
    if (config.command == "baseline" && baseline_method->count() == 0) config.method = "landmark";

    try {
        align::run(config);
    } catch (const align::Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error:internal: %s\n", e.what());
        return 2;
    }
    return 0;
}

#pragma once

#include <string>
#include <vector>

#include "align/baselines.hpp"
#include "align/registration.hpp"
#include "align/simulate.hpp"
#include "align/tuning.hpp"

namespace align {

enum class CsvFormat { automatic, long_format, wide };

CsvFormat parse_csv_format(const std::string& name);

// Long format: rows (curve_id, t, y), per-curve grids may differ.
// Wide format: column 1 is t, one column per curve, header row carries ids.
Dataset load_curves(const std::string& path, CsvFormat format = CsvFormat::automatic);

// Wide when every curve shares one grid, long otherwise.
void save_curves(const std::string& path, const Dataset& data);

// One column per curve over a common grid (synchronized_curves.csv, warps.csv).
void write_grid_csv(const std::string& path, const std::string& time_header,
                    const Eigen::VectorXd& grid, const Eigen::MatrixXd& columns,
                    const std::vector<std::string>& ids);

// Everything the CLI accepts; `command` selects the subcommand.
struct RunConfig {
    std::string command = "fit"; // fit | tune | simulate | baseline | metrics
    std::string input;
    std::string out_dir = ".";
    std::string method = "moments"; // moments | landmark | cmr
    std::string features = "max:r=100,min:r=100";
    std::string warp = "standardized";
    std::string landmarks = "max"; // landmark events, comma list
    std::string format = "auto";
    bool plots = false;

    FitConfig fit;
    TuningGrid grid = TuningGrid::defaults();
    Scenario scenario;
    std::uint64_t seed = 1;
};

// Resolved-config echo; metrics reruns read it back.
void write_run_config(const std::string& path, const RunConfig& config);
RunConfig read_run_config(const std::string& path);

// Executes the subcommand, writing artifacts under config.out_dir. Throws
// align::Error on module failures; the CLI maps that to a nonzero exit.
void run(const RunConfig& config);

// Artifact writers shared by run() and the tests.
void write_fit_artifacts(const std::string& out_dir, const RunConfig& config, const Dataset& data,
                         const FitResult& result);
void write_tuning_artifacts(const std::string& out_dir, const RunConfig& config,
                            const TuningReport& report);

// Pieces of a fit reloaded from params.csv.
struct StoredParams {
    std::vector<CurveParams> params;
    Eigen::VectorXd mu_theta;
};
StoredParams read_params_csv(const std::string& path, const FitConfig& fit, double t0, double t1);

struct RecomputedMetrics {
    FitMetrics metrics;
    bool consistent = true; // against metrics.txt when present
};
RecomputedMetrics recompute_metrics(const std::string& out_dir, const std::string& input_csv);

} // namespace align

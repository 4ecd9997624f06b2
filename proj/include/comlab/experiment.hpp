#pragma once

// Experiment harness: named desk-scale experiments over the library kernels,
// with deterministic seeding, CSV + JSON-manifest persistence and optional SVG
// line plots.
//
// Determinism contract: a fixed (experiment, config, seed) triple produces
// byte-identical CSV output on every run and under either execution policy.
// Experiments parallelize over their parameter tuples; each tuple's rows are
// computed independently (inner kernels run serially) and concatenated in the
// canonical enumeration order, so the merge is order-independent.
//
// Persistence layout under config.out_dir:
//     <experiment>.csv    one row per (parameter tuple, trial)
//     <experiment>.json   run manifest (config snapshot, schema, calibration)
//     <experiment>.svg    line plot, only for experiments with a natural curve
// The per-experiment CSV column schemas are frozen and documented in the
// README; parse_manifest() re-validates a manifest against them on load.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "comlab/parallel.hpp"

namespace comlab {

struct ExperimentConfig {
    std::string experiment;                       // one of experiment_ids()
    std::vector<std::size_t> grids = {64};        // per-axis sample counts
    std::vector<int> degrees = {1, 2};            // commutator degrees d
    std::vector<std::int64_t> shifts = {0, 1, 4, 16};
    std::vector<double> exponents = {2.0};        // Lebesgue exponents p
    int trials = 4;
    std::uint64_t seed = 1;
    std::string out_dir = "runs";
    double cost_ceiling = 2.0e11;                 // rough flop budget
    Exec exec = Exec::serial;
};

// The ten experiment ids, in canonical order.
const std::vector<std::string>& experiment_ids();

// Frozen CSV schema for one experiment id; UsageError for unknown ids.
const std::vector<std::string>& experiment_columns(const std::string& id);

// Throws UsageError (unknown id) or ConfigError (empty ranges, non-power-of-
// two grids, degree/shift/exponent values outside the supported windows).
void validate_config(const ExperimentConfig& config);

// Crude predicted operation count used for the admission check; run_experiment
// refuses with BudgetError when it exceeds config.cost_ceiling.
double estimate_cost(const ExperimentConfig& config);

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // rows[i].size() == columns.size()
};

inline constexpr const char* kArtifactVersion = "0.1.0";

struct RunManifest {
    std::string artifact_version = kArtifactVersion;
    ExperimentConfig config;
    std::vector<std::string> columns;
    std::size_t row_count = 0;
    double wall_seconds = 0.0;
    std::map<std::string, double> calibration;  // kappa, C, C0, ... as used
    bool all_pass = true;
    std::string csv_file;                 // basename within out_dir
    std::vector<std::string> artifacts;   // extra outputs (SVG plots)
};

// Shortest-round-trip decimal text for CSV cells: locale-independent, '.'
// decimal separator, no trailing zeros.
std::string format_number(double v);

// Header line + rows, ',' separated, '\n' line endings, trailing newline.
std::string table_csv(const ResultTable& table);

// Compute without touching the filesystem.  Fills manifest.columns/row_count/
// calibration/all_pass; config must already validate.
ResultTable compute_experiment(const ExperimentConfig& config, RunManifest& manifest);

// validate + compute + persist CSV/manifest/plots under config.out_dir.
RunManifest run_experiment(const ExperimentConfig& config);

std::string manifest_json(const RunManifest& manifest);

// Parse and re-validate: every field present with the right type, the
// experiment id known, and the column list equal to the frozen schema.
// Throws ConfigError on any violation.
RunManifest parse_manifest(const std::string& json_text);

// Minimal deterministic SVG line plot (single polyline, optional log axes).
std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<std::pair<double, double>>& points, bool log_x,
                          bool log_y);

}  // namespace comlab

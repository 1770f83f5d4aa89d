#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pspd/curriculum.hpp"
#include "pspd/data.hpp"
#include "pspd/metrics.hpp"

namespace pspd {

struct DataSource {
    enum class Kind { Synthetic, Csv };
    Kind kind = Kind::Synthetic;
    // Synthetic: the generator seed is taken from the experiment seed.
    SyntheticSpec synthetic{};
    std::filesystem::path csv_path;
    CsvOptions csv{};
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t folds = 4;
    // Worker threads for independent folds/arms. Never affects results.
    std::size_t threads = 1;
    std::filesystem::path output_dir = "results";
    DataSource data{};
    // Fractions only; each fold draws its own split seed.
    SplitSpec split{};
    TrainConfig training{};
    // ablate: also run the four (pcl, pcd) regularizer combinations.
    bool kind_sweep = false;

    // Throws ConfigError.
    void validate() const;

    // Resolved settings as canonical JSON. Excludes output_dir and threads,
    // which do not change results.
    std::string canonical_json() const;
    // SHA-256 of canonical_json(), lowercase hex.
    std::string hash() const;
};

// YAML. Unknown keys, bad types and invalid values raise ConfigError with a
// "<source>:<line>:<column>: " prefix.
ExperimentConfig parse_experiment_config(std::string_view text, std::string_view source_name);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// gen-data spec: a flat YAML mapping of SyntheticSpec fields.
SyntheticSpec parse_synthetic_spec(std::string_view text, std::string_view source_name);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<Ablation> ablation;
    std::optional<double> gamma;
    std::optional<std::size_t> threads;
    std::optional<std::filesystem::path> output_dir;
};

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

// One fold's data after splitting and train-only standardization.
struct FoldData {
    std::size_t fold = 0;
    std::uint64_t seed = 0; // split and training seed
    Dataset train;
    Dataset val;
    Dataset test;
};

// Folds are independent seeded stratified resamples (seed + fold).
std::vector<FoldData> prepare_folds(const ExperimentConfig& config);

// One training run: an ablation arm, possibly with overridden regularizer kinds.
struct Arm {
    std::string name;
    Ablation ablation = Ablation::Full;
    RegularizerKind pcl_kind = RegularizerKind::Hard;
    RegularizerKind pcd_kind = RegularizerKind::Soft;
};

struct FoldResult {
    std::size_t fold = 0;
    Arm arm;
    MetricsReport test;
    std::optional<MetricsReport> final_validation;
    TrainingTrace trace;
    ModelParameters params;
};

// Runs every (arm, fold) pair on config.threads workers. Results are ordered
// arm-major, fold-minor regardless of scheduling.
std::vector<FoldResult> run_arms(const ExperimentConfig& config, std::span<const Arm> arms,
                                 std::span<const FoldData> folds);

struct MetricSummary {
    std::string metric;
    std::size_t n = 0; // folds where the metric is defined
    double mean = 0.0;
    std::optional<double> std; // sample standard deviation, needs n >= 2
};

std::vector<MetricSummary> summarize(std::span<const FoldResult> results);

struct RunReport {
    std::string config_hash;
    std::vector<FoldResult> results;
    std::vector<MetricSummary> summary;
};

// run: one arm (config.training) across all folds. Writes
//   fold_<k>/{metrics.json,trace.csv}, summary.csv, config.json,
//   manifest.json (the only file with a timestamp).
RunReport run_experiment(const ExperimentConfig& config);

struct AblationReport {
    std::string config_hash;
    std::vector<FoldResult> results;
    std::vector<FoldResult> kind_sweep; // empty unless requested
};

// ablate: Baseline, PclOnly, PcdOnly, Full on shared folds. Writes
//   <arm>/fold_<k>/..., ablation.csv (4 rows per fold), ablation_summary.csv,
//   and kind_sweep.csv when requested, plus config.json and manifest.json.
AblationReport run_ablation_grid(const ExperimentConfig& config);

std::vector<Arm> ablation_arms(const TrainConfig& training);
std::vector<Arm> kind_sweep_arms();

// Merges trace CSVs into long format: run,epoch,metric,value. The run label
// is the trace path without its extension. Empty cells are skipped. Throws
// InvalidInput naming the file on malformed input.
void emit_curves(std::span<const std::filesystem::path> traces, const std::filesystem::path& out);

} // namespace pspd

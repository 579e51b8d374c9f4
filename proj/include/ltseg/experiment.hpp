#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltseg/classifier.hpp"
#include "ltseg/decode.hpp"
#include "ltseg/metrics.hpp"
#include "ltseg/seqdata.hpp"

namespace ltseg {

namespace fs = std::filesystem;

enum class DecodeMode { argmax, ncm, sncm };
std::string to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& name);

struct ExperimentConfig {
    // Exactly one source: a synthetic config or a training manifest.
    std::optional<SynthConfig> synthetic;
    int test_sequences = 100;  // synthetic held-out split size (0 = none)
    std::optional<fs::path> train_manifest;
    std::optional<fs::path> test_manifest;

    TrainConfig train;
    DecodeMode decode = DecodeMode::argmax;
    EvalOptions eval;
    // Head/tail frame-count threshold over training-set class counts;
    // unset means the mean class frame count.
    std::optional<double> head_tail_threshold;
    std::uint64_t seed = 0;

    static ExperimentConfig defaults();
    // Missing fields keep their defaults; unknown keys are rejected.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
    // Applies seed to both the generator and the trainer.
    void set_seed(std::uint64_t s);
    void validate() const;
    // Stable FNV-1a hash of the effective config, as 16 hex digits.
    std::string hash() const;
};

ExperimentConfig load_experiment_config(const fs::path& path);

struct DatasetSplits {
    Dataset train;
    std::optional<Dataset> test;
};

DatasetSplits resolve_datasets(const ExperimentConfig& config);

// Per-sequence decoded labels. ncm/sncm need class means from the training split.
std::vector<std::vector<Label>> decode_dataset(const ClassifierParams& params, const Dataset& data,
                                               DecodeMode mode, const ClassMeans* means = nullptr);

HeadTailSplit split_for(const ExperimentConfig& config, const Dataset& train);

// Train + evaluate in memory: metrics for the configured decoder on the
// test split (or the training split if there is none).
struct ExperimentResult {
    TrainResult training;
    MetricsReport report;
};
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplits& splits);

// Subcommands. Each writes its outputs plus the effective config.json into out.
void cmd_gen(const ExperimentConfig& config, const fs::path& out, std::ostream& log);
TrainResult cmd_train(const ExperimentConfig& config, const fs::path& out, std::ostream& log);
std::vector<MetricsReport> cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint,
                                    const fs::path& out, std::ostream& log);

// Comparison table: per-class F1@{10,25,50}, per-class accuracy, global
// F1@25, and signed deltas against the first report.
struct ComparisonTable {
    std::vector<std::string> columns;
    std::vector<std::string> methods;
    std::vector<std::vector<double>> values;  // per method, per column
    std::vector<std::vector<double>> deltas;

    std::string to_csv() const;
    nlohmann::ordered_json to_json() const;
};
ComparisonTable compare_reports(const std::vector<MetricsReport>& reports);
ComparisonTable cmd_report(const std::vector<fs::path>& report_files, const fs::path& out, std::ostream& log);

// "<hash>-<UTC timestamp>" run directory under root.
fs::path default_run_dir(const ExperimentConfig& config, const fs::path& root = "runs");

}  // namespace ltseg

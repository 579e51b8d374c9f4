#include "ltseg/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <set>
#include <sstream>

#include "ltseg/error.hpp"
#include "ltseg/io.hpp"

namespace ltseg {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(DecodeMode mode) {
    switch (mode) {
        case DecodeMode::argmax: return "argmax";
        case DecodeMode::ncm: return "ncm";
        case DecodeMode::sncm: return "sncm";
    }
    return "unknown";
}

DecodeMode parse_decode_mode(const std::string& name) {
    if (name == "argmax") return DecodeMode::argmax;
    if (name == "ncm") return DecodeMode::ncm;
    if (name == "sncm") return DecodeMode::sncm;
    throw ConfigError("unknown decode mode '" + name + "' (argmax, ncm, sncm)");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

ordered_json synth_to_json(const SynthConfig& c) {
    ordered_json j;
    j["num_classes"] = c.num_classes;
    j["feature_dim"] = c.feature_dim;
    j["num_sequences"] = c.num_sequences;
    j["mean_segments_per_sequence"] = c.mean_segments_per_sequence;
    j["class_skew"] = c.class_skew;
    j["duration_mean"] = c.duration_mean;
    j["duration_skew"] = c.duration_skew;
    j["duration_spread"] = c.duration_spread;
    j["class_duration_means"] = c.class_duration_means;
    j["mean_scale"] = c.mean_scale;
    j["emitter_means"] = c.emitter_means;
    j["noise_scale"] = c.noise_scale;
    j["transition_skew"] = c.transition_skew;
    return j;
}

SynthConfig synth_from_json(const json& j) {
    reject_unknown(j,
                   {"num_classes", "feature_dim", "num_sequences", "mean_segments_per_sequence", "class_skew",
                    "duration_mean", "duration_skew", "duration_spread", "class_duration_means", "mean_scale",
                    "emitter_means", "noise_scale", "transition_skew"},
                   "dataset.synthetic");
    SynthConfig c;
    read_opt(j, "num_classes", c.num_classes);
    read_opt(j, "feature_dim", c.feature_dim);
    read_opt(j, "num_sequences", c.num_sequences);
    read_opt(j, "mean_segments_per_sequence", c.mean_segments_per_sequence);
    read_opt(j, "class_skew", c.class_skew);
    read_opt(j, "duration_mean", c.duration_mean);
    read_opt(j, "duration_skew", c.duration_skew);
    read_opt(j, "duration_spread", c.duration_spread);
    read_opt(j, "class_duration_means", c.class_duration_means);
    read_opt(j, "mean_scale", c.mean_scale);
    read_opt(j, "emitter_means", c.emitter_means);
    read_opt(j, "noise_scale", c.noise_scale);
    read_opt(j, "transition_skew", c.transition_skew);
    return c;
}

ordered_json train_to_json(const TrainConfig& c) {
    ordered_json j;
    j["loss"] = to_string(c.loss_mode);
    j["epochs"] = c.epochs;
    j["learning_rate"] = c.learning_rate;
    j["batch_sequences"] = c.batch_sequences;
    j["context_radius"] = c.context_radius;
    j["tau"] = c.tau;
    j["epsilon"] = c.epsilon;
    j["gamma"] = c.gamma;
    j["confusion_subset"] = c.confusion_subset;
    return j;
}

TrainConfig train_from_json(const json& j) {
    reject_unknown(j,
                   {"loss", "epochs", "learning_rate", "batch_sequences", "context_radius", "tau", "epsilon",
                    "gamma", "confusion_subset"},
                   "train");
    TrainConfig c;
    if (j.contains("loss")) c.loss_mode = parse_loss_mode(j.at("loss").get<std::string>());
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "learning_rate", c.learning_rate);
    read_opt(j, "batch_sequences", c.batch_sequences);
    read_opt(j, "context_radius", c.context_radius);
    read_opt(j, "tau", c.tau);
    read_opt(j, "epsilon", c.epsilon);
    read_opt(j, "gamma", c.gamma);
    read_opt(j, "confusion_subset", c.confusion_subset);
    return c;
}

// Distinct sampling stream for the held-out synthetic split.
constexpr std::uint64_t kTestSplitSalt = 0x9e3779b97f4a7c15ull;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.synthetic = SynthConfig{};
    return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c = defaults();
    try {
        reject_unknown(j, {"seed", "dataset", "train", "decode", "eval", "head_tail_threshold"}, "config");
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            reject_unknown(d, {"synthetic", "test_sequences", "train_manifest", "test_manifest"}, "dataset");
            const bool has_synth = d.contains("synthetic");
            const bool has_manifest = d.contains("train_manifest");
            if (has_synth == has_manifest) {
                throw ConfigError("dataset: give exactly one of 'synthetic' or 'train_manifest'");
            }
            if (has_synth) {
                c.synthetic = synth_from_json(d.at("synthetic"));
                read_opt(d, "test_sequences", c.test_sequences);
            } else {
                c.synthetic.reset();
                c.train_manifest = d.at("train_manifest").get<std::string>();
                if (d.contains("test_manifest") && !d.at("test_manifest").is_null()) {
                    c.test_manifest = d.at("test_manifest").get<std::string>();
                }
            }
        }
        if (j.contains("train")) c.train = train_from_json(j.at("train"));
        if (j.contains("decode")) c.decode = parse_decode_mode(j.at("decode").get<std::string>());
        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            reject_unknown(e, {"thresholds", "pool_f1"}, "eval");
            read_opt(e, "thresholds", c.eval.thresholds);
            read_opt(e, "pool_f1", c.eval.pool_f1);
        }
        if (j.contains("head_tail_threshold") && !j.at("head_tail_threshold").is_null()) {
            c.head_tail_threshold = j.at("head_tail_threshold").get<double>();
        }
        c.set_seed(j.value("seed", std::uint64_t{0}));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["seed"] = seed;
    ordered_json d;
    if (synthetic) {
        d["synthetic"] = synth_to_json(*synthetic);
        d["test_sequences"] = test_sequences;
    } else {
        d["train_manifest"] = train_manifest ? train_manifest->string() : std::string();
        d["test_manifest"] = test_manifest ? json(test_manifest->string()) : json(nullptr);
    }
    j["dataset"] = d;
    j["train"] = train_to_json(train);
    j["decode"] = to_string(decode);
    j["eval"] = {{"thresholds", eval.thresholds}, {"pool_f1", eval.pool_f1}};
    j["head_tail_threshold"] = head_tail_threshold ? json(*head_tail_threshold) : json(nullptr);
    return j;
}

void ExperimentConfig::set_seed(std::uint64_t s) {
    seed = s;
    train.rng_seed = s;
    if (synthetic) synthetic->rng_seed = s;
}

void ExperimentConfig::validate() const {
    if (synthetic.has_value() == train_manifest.has_value()) {
        throw ConfigError("config: exactly one dataset source is required");
    }
    if (synthetic) {
        synthetic->validate();
        if (test_sequences < 0) throw ConfigError("config: test_sequences must be >= 0");
    } else {
        if (!fs::exists(*train_manifest)) throw ConfigError("config: train manifest '" + train_manifest->string() + "' not found");
        if (test_manifest && !fs::exists(*test_manifest)) {
            throw ConfigError("config: test manifest '" + test_manifest->string() + "' not found");
        }
    }
    train.validate();
    for (double t : eval.thresholds) {
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("config: IoU thresholds must be in (0, 1)");
    }
    if (head_tail_threshold && !(*head_tail_threshold > 0.0)) {
        throw ConfigError("config: head_tail_threshold must be positive");
    }
}

std::string ExperimentConfig::hash() const {
    const std::string text = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return hex64(h);
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
    }
    // Manifest paths are relative to the config file.
    if (j.contains("dataset") && j["dataset"].is_object()) {
        for (const char* key : {"train_manifest", "test_manifest"}) {
            auto& d = j["dataset"];
            if (d.contains(key) && d[key].is_string()) {
                const fs::path p = d[key].get<std::string>();
                if (p.is_relative()) d[key] = (path.parent_path() / p).lexically_normal().string();
            }
        }
    }
    return ExperimentConfig::from_json(j);
}

DatasetSplits resolve_datasets(const ExperimentConfig& config) {
    config.validate();
    if (config.synthetic) {
        const SyntheticWorld world = make_synthetic_world(*config.synthetic);
        DatasetSplits s{sample_synthetic(world, config.synthetic->num_sequences, config.seed, "train_"), std::nullopt};
        if (config.test_sequences > 0) {
            s.test = sample_synthetic(world, config.test_sequences, config.seed ^ kTestSplitSalt, "test_");
        }
        return s;
    }
    DatasetSplits s{io::load_dataset(*config.train_manifest), std::nullopt};
    if (config.test_manifest) {
        s.test = io::load_dataset(*config.test_manifest);
        if (s.test->num_classes() != s.train.num_classes() || s.test->feature_dim() != s.train.feature_dim()) {
            throw ConfigError("test split has L/D different from the training split");
        }
    }
    return s;
}

std::vector<std::vector<Label>> decode_dataset(const ClassifierParams& params, const Dataset& data,
                                               DecodeMode mode, const ClassMeans* means) {
    if (mode != DecodeMode::argmax && !means) throw ConfigError("decode: " + to_string(mode) + " needs class means");
    std::vector<std::vector<Label>> out;
    out.reserve(data.sequences().size());
    const auto represent = windowed_representation(params.context_radius);
    for (const auto& seq : data.sequences()) {
        switch (mode) {
            case DecodeMode::argmax: out.push_back(predict_sequence(params, seq)); break;
            case DecodeMode::ncm: out.push_back(ncm_predict(*means, represent(seq))); break;
            case DecodeMode::sncm:
                out.push_back(sncm_decode(predict_sequence(params, seq), ncm_predict(*means, represent(seq))));
                break;
        }
    }
    return out;
}

HeadTailSplit split_for(const ExperimentConfig& config, const Dataset& train) {
    const double threshold = config.head_tail_threshold.value_or(
        static_cast<double>(train.total_frames()) / static_cast<double>(train.num_classes()));
    return head_tail_split(train.class_frame_counts(), threshold);
}

namespace {

std::string report_name(const ExperimentConfig& config, DecodeMode mode) {
    return to_string(config.train.loss_mode) + "+" + to_string(mode);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplits& splits) {
    ExperimentResult r{train(splits.train, config.train), {}};
    const Dataset& eval_set = splits.test ? *splits.test : splits.train;
    std::optional<ClassMeans> means;
    if (config.decode != DecodeMode::argmax) {
        means = compute_class_means(splits.train, windowed_representation(config.train.context_radius));
    }
    const auto preds = decode_dataset(r.training.params, eval_set, config.decode, means ? &*means : nullptr);
    r.report = evaluate(report_name(config, config.decode), preds, eval_set, split_for(config, splits.train), config.eval);
    return r;
}

namespace {

void write_config(const ExperimentConfig& config, const fs::path& out) {
    io::write_text(out / "config.json", config.to_json().dump(2) + "\n");
}

std::string class_count_csv(const Dataset& d) {
    std::vector<std::pair<std::uint64_t, Label>> rows;
    for (Label c = 0; c < d.num_classes(); ++c) rows.emplace_back(d.class_frame_counts()[static_cast<std::size_t>(c)], c);
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::ostringstream ss;
    ss << "rank,class_id,class_name,frames\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ss << r << ',' << rows[r].second << ',' << d.class_names()[static_cast<std::size_t>(rows[r].second)] << ','
           << rows[r].first << '\n';
    }
    return ss.str();
}

}  // namespace

void cmd_gen(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
    if (!config.synthetic) throw ConfigError("gen: config has no synthetic dataset section");
    const DatasetSplits splits = resolve_datasets(config);
    try {
        fs::create_directories(out);
    } catch (const fs::filesystem_error& e) {
        throw IoError("gen: cannot create output directory '" + out.string() + "': " + e.what());
    }
    io::save_dataset(splits.train, out / "train");
    if (splits.test) io::save_dataset(*splits.test, out / "test");
    const std::string csv = class_count_csv(splits.train);
    io::write_text(out / "class_counts.csv", csv);
    write_config(config, out);
    log << csv;
}

TrainResult cmd_train(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
    const DatasetSplits splits = resolve_datasets(config);
    fs::create_directories(out);
    write_config(config, out);
    TrainResult result = train(splits.train, config.train);
    std::string lines;
    for (const auto& rec : result.telemetry) lines += rec.to_json() + "\n";
    io::write_text(out / "telemetry.jsonl", lines);
    save_checkpoint(out / "checkpoint.bin", result.params, config.train.epochs);
    std::ostringstream lambda;
    lambda << "i,k,lambda\n";
    lambda.precision(17);
    for (Eigen::Index i = 0; i < result.multipliers.lambda.rows(); ++i)
        for (Eigen::Index k = 0; k < result.multipliers.lambda.cols(); ++k)
            if (result.stats.valid(static_cast<Label>(i), static_cast<Label>(k)))
                lambda << i << ',' << k << ',' << result.multipliers.lambda(i, k) << '\n';
    io::write_text(out / "multipliers.csv", lambda.str());
    if (!result.telemetry.empty()) log << result.telemetry.back().to_json() << '\n';
    return result;
}

std::vector<MetricsReport> cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint,
                                    const fs::path& out, std::ostream& log) {
    const DatasetSplits splits = resolve_datasets(config);
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    if (ckpt.params.num_classes() != splits.train.num_classes() ||
        ckpt.params.feature_dim() != splits.train.feature_dim()) {
        throw ConfigError("eval: checkpoint has L=" + std::to_string(ckpt.params.num_classes()) + ", D=" +
                          std::to_string(ckpt.params.feature_dim()) + " but dataset has L=" +
                          std::to_string(splits.train.num_classes()) + ", D=" +
                          std::to_string(splits.train.feature_dim()));
    }
    const Dataset& eval_set = splits.test ? *splits.test : splits.train;
    const HeadTailSplit split = split_for(config, splits.train);
    std::optional<ClassMeans> means;
    if (config.decode != DecodeMode::argmax) {
        means = compute_class_means(splits.train, windowed_representation(ckpt.params.context_radius));
    }
    std::vector<DecodeMode> modes{config.decode};
    if (config.decode == DecodeMode::sncm) modes.push_back(DecodeMode::ncm);

    fs::create_directories(out);
    write_config(config, out);
    std::vector<MetricsReport> reports;
    for (DecodeMode mode : modes) {
        const auto preds = decode_dataset(ckpt.params, eval_set, mode, means ? &*means : nullptr);
        for (std::size_t n = 0; n < preds.size(); ++n) {
            io::write_label_file(out / "predictions" / to_string(mode) / (eval_set.sequences()[n].id() + ".txt"),
                                 preds[n], eval_set.class_names());
        }
        MetricsReport report = evaluate(report_name(config, mode), preds, eval_set, split, config.eval);
        io::write_text(out / ("report_" + to_string(mode) + ".json"), report.to_json().dump(2) + "\n");
        io::write_text(out / ("report_" + to_string(mode) + ".csv"), report.to_csv());
        log << report.to_csv();
        reports.push_back(std::move(report));
    }
    return reports;
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream ss;
    ss << "method";
    for (const auto& c : columns) ss << ',' << c;
    for (const auto& c : columns) ss << ",delta_" << c;
    ss << '\n';
    auto fmt = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    for (std::size_t r = 0; r < methods.size(); ++r) {
        ss << methods[r];
        for (double v : values[r]) ss << ',' << fmt(v);
        for (double v : deltas[r]) ss << ',' << (v > 0 ? "+" : "") << fmt(v);
        ss << '\n';
    }
    return ss.str();
}

ordered_json ComparisonTable::to_json() const {
    ordered_json j;
    j["columns"] = columns;
    j["rows"] = ordered_json::array();
    for (std::size_t r = 0; r < methods.size(); ++r) {
        ordered_json row;
        row["method"] = methods[r];
        ordered_json vals, ds;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            vals[columns[c]] = round2(values[r][c]);
            ds[columns[c]] = round2(deltas[r][c]);
        }
        row["values"] = vals;
        row["deltas"] = ds;
        j["rows"].push_back(row);
    }
    return j;
}

ComparisonTable compare_reports(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ConfigError("report: need at least one report");
    ComparisonTable t;
    t.columns = {"per_class_f1@10", "per_class_f1@25", "per_class_f1@50", "per_class_acc", "global_f1@25"};
    for (const auto& r : reports) {
        if (r.num_classes != reports.front().num_classes) {
            throw ConfigError("report: '" + r.name + "' has " + std::to_string(r.num_classes) + " classes but '" +
                              reports.front().name + "' has " + std::to_string(reports.front().num_classes));
        }
        t.methods.push_back(r.name);
        t.values.push_back({r.f1_at(0.10).per_class, r.f1_at(0.25).per_class, r.f1_at(0.50).per_class,
                            r.per_class_acc, r.f1_at(0.25).global});
    }
    for (const auto& row : t.values) {
        std::vector<double> d(row.size());
        for (std::size_t c = 0; c < row.size(); ++c) d[c] = row[c] - t.values.front()[c];
        t.deltas.push_back(d);
    }
    return t;
}

ComparisonTable cmd_report(const std::vector<fs::path>& report_files, const fs::path& out, std::ostream& log) {
    std::vector<MetricsReport> reports;
    for (const auto& f : report_files) {
        json j;
        try {
            j = json::parse(io::read_text(f));
        } catch (const json::parse_error& e) {
            throw ParseError(f.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
        }
        reports.push_back(MetricsReport::from_json(j));
    }
    ComparisonTable table = compare_reports(reports);
    fs::create_directories(out);
    io::write_text(out / "comparison.csv", table.to_csv());
    io::write_text(out / "comparison.json", table.to_json().dump(2) + "\n");
    log << table.to_csv();
    return table;
}

fs::path default_run_dir(const ExperimentConfig& config, const fs::path& root) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
    return root / (config.hash() + "-" + stamp);
}

}  // namespace ltseg

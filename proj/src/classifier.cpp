#include "ltseg/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "ltseg/error.hpp"

namespace ltseg {

ClassifierParams ClassifierParams::zeros(int num_classes, int feature_dim, int context_radius) {
    if (num_classes <= 0 || feature_dim <= 0 || context_radius < 0) {
        throw ConfigError("ClassifierParams: need L > 0, D > 0, radius >= 0");
    }
    ClassifierParams p;
    p.context_radius = context_radius;
    p.weights = Eigen::MatrixXd::Zero(num_classes, feature_dim * (2 * context_radius + 1));
    p.bias = Eigen::VectorXd::Zero(num_classes);
    return p;
}

void ClassifierParams::validate() const {
    if (context_radius < 0) throw ConfigError("ClassifierParams: negative context radius");
    if (weights.rows() <= 0 || bias.size() != weights.rows()) {
        throw ConfigError("ClassifierParams: weights/bias shape mismatch");
    }
    if (weights.cols() <= 0 || weights.cols() % (2 * context_radius + 1) != 0) {
        throw ConfigError("ClassifierParams: input width is not a multiple of the window size");
    }
    if (!weights.allFinite() || !bias.allFinite()) throw ConfigError("ClassifierParams: non-finite entries");
}

Eigen::VectorXd windowed_feature(const FeatureMatrix& features, std::size_t t, int radius) {
    const auto D = features.rows();
    const auto T = static_cast<long>(features.cols());
    if (static_cast<long>(t) >= T) throw RangeError("windowed_feature: frame " + std::to_string(t) + " out of range");
    Eigen::VectorXd x(D * (2 * radius + 1));
    for (int o = -radius; o <= radius; ++o) {
        const long src = std::clamp(static_cast<long>(t) + o, 0L, T - 1);
        x.segment((o + radius) * D, D) = features.col(src).cast<double>();
    }
    return x;
}

Eigen::MatrixXd windowed_features(const FeatureMatrix& features, int radius) {
    const auto D = features.rows();
    const auto T = features.cols();
    Eigen::MatrixXd x(D * (2 * radius + 1), T);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int o = -radius; o <= radius; ++o) {
            const Eigen::Index src = std::clamp<Eigen::Index>(t + o, 0, T - 1);
            x.block((o + radius) * D, t, D, 1) = features.col(src).cast<double>();
        }
    }
    return x;
}

namespace {

void check_compatible(const ClassifierParams& params, int num_classes, int feature_dim, const char* fn) {
    if (params.num_classes() != num_classes || params.feature_dim() != feature_dim) {
        throw ConfigError(std::string(fn) + ": classifier has L=" + std::to_string(params.num_classes()) +
                          ", D=" + std::to_string(params.feature_dim()) + " but data has L=" +
                          std::to_string(num_classes) + ", D=" + std::to_string(feature_dim));
    }
}

std::vector<Label> predict_inputs(const ClassifierParams& params, const Eigen::MatrixXd& inputs) {
    const Eigen::MatrixXd logits = (params.weights * inputs).colwise() + params.bias;
    std::vector<Label> labels(static_cast<std::size_t>(inputs.cols()));
    for (Eigen::Index t = 0; t < logits.cols(); ++t) labels[static_cast<std::size_t>(t)] = argmax(logits.col(t));
    return labels;
}

}  // namespace

Eigen::VectorXd frame_logits(const ClassifierParams& params, const LabeledSequence& seq, std::size_t t) {
    check_compatible(params, seq.num_classes(), seq.feature_dim(), "forward");
    if (t >= seq.num_frames()) {
        throw RangeError("forward: frame " + std::to_string(t) + " >= T=" + std::to_string(seq.num_frames()));
    }
    return params.weights * windowed_feature(seq.features(), t, params.context_radius) + params.bias;
}

Eigen::VectorXd forward(const ClassifierParams& params, const LabeledSequence& seq, std::size_t t) {
    return softmax(frame_logits(params, seq, t));
}

Label argmax(const Eigen::Ref<const Eigen::VectorXd>& values) {
    Label best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values(i) > values(best)) best = static_cast<Label>(i);
    }
    return best;
}

std::vector<Label> predict_sequence(const ClassifierParams& params, const LabeledSequence& seq) {
    check_compatible(params, seq.num_classes(), seq.feature_dim(), "predict_sequence");
    return predict_inputs(params, windowed_features(seq.features(), params.context_radius));
}

ConfusionTensor compute_confusion(const ClassifierParams& params, const Dataset& dataset,
                                  const ConfusionOptions& options) {
    check_compatible(params, dataset.num_classes(), dataset.feature_dim(), "compute_confusion");
    return compute_confusion(
        [&params](const LabeledSequence& seq) { return predict_sequence(params, seq); }, dataset, options);
}

std::string to_string(LossMode mode) {
    switch (mode) {
        case LossMode::plain_ce: return "plain_ce";
        case LossMode::inverse_prior: return "inverse_prior";
        case LossMode::cost_sensitive: return "cost_sensitive";
    }
    return "unknown";
}

LossMode parse_loss_mode(const std::string& name) {
    if (name == "plain_ce") return LossMode::plain_ce;
    if (name == "inverse_prior") return LossMode::inverse_prior;
    if (name == "cost_sensitive") return LossMode::cost_sensitive;
    throw ConfigError("unknown loss mode '" + name + "' (plain_ce, inverse_prior, cost_sensitive)");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be positive");
    if (batch_sequences <= 0) throw ConfigError("train: batch_sequences must be positive");
    if (context_radius < 0) throw ConfigError("train: context_radius must be >= 0");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("train: tau must be >= 0");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("train: epsilon must be in (0, 1]");
    if (!(gamma > 0.0)) throw ConfigError("train: gamma must be positive");
    if (!(confusion_subset > 0.0 && confusion_subset <= 1.0)) {
        throw ConfigError("train: confusion_subset must be in (0, 1]");
    }
}

std::string EpochRecord::to_json() const {
    nlohmann::ordered_json j;
    j["epoch"] = epoch;
    j["loss"] = mean_loss;
    j["train_acc"] = train_acc;
    if (has_multipliers) {
        j["lagrangian"] = lagrangian;
        j["mean_trans_acc"] = mean_trans_acc;
        j["lambda_min"] = lambda.min;
        j["lambda_mean"] = lambda.mean;
        j["lambda_max"] = lambda.max;
        j["violated"] = lambda.violated;
    }
    return j.dump();
}

namespace {

// Accumulates the weighted loss and its parameter gradient over frames.
struct BatchGradient {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    double loss = 0.0;
    std::size_t frames = 0;

    explicit BatchGradient(const ClassifierParams& p)
        : weights(Eigen::MatrixXd::Zero(p.weights.rows(), p.weights.cols())),
          bias(Eigen::VectorXd::Zero(p.bias.size())) {}

    void add_sequence(const ClassifierParams& params, const Eigen::MatrixXd& inputs,
                      const LabeledSequence& seq, const GainWeights& gain) {
        const auto& y = seq.frame_labels();
        const auto& u = seq.prev_action();
        Eigen::MatrixXd logits = (params.weights * inputs).colwise() + params.bias;
        for (Eigen::Index t = 0; t < logits.cols(); ++t) {
            auto col = logits.col(t);
            col.array() -= col.maxCoeff();
            col = col.array().exp();
            col /= col.sum();
            const auto yt = y[static_cast<std::size_t>(t)];
            const double w = gain.weight(yt, u[static_cast<std::size_t>(t)]);
            loss += w * -std::log(std::max(col(yt), kProbabilityFloor));
            col(yt) -= 1.0;
            col *= w;
        }
        weights.noalias() += logits * inputs.transpose();
        bias += logits.rowwise().sum();
        frames += static_cast<std::size_t>(inputs.cols());
    }
};

std::vector<Eigen::MatrixXd> precompute_inputs(const Dataset& dataset, int radius) {
    std::vector<Eigen::MatrixXd> inputs;
    inputs.reserve(dataset.sequences().size());
    for (const auto& seq : dataset.sequences()) inputs.push_back(windowed_features(seq.features(), radius));
    return inputs;
}

}  // namespace

double training_loss(const ClassifierParams& params, const Dataset& dataset, const GainWeights& weights) {
    check_compatible(params, dataset.num_classes(), dataset.feature_dim(), "training_loss");
    BatchGradient acc(params);
    for (const auto& seq : dataset.sequences()) {
        acc.add_sequence(params, windowed_features(seq.features(), params.context_radius), seq, weights);
    }
    return acc.frames ? acc.loss / static_cast<double>(acc.frames) : 0.0;
}

ClassifierParams training_loss_gradient(const ClassifierParams& params, const Dataset& dataset,
                                        const GainWeights& weights) {
    check_compatible(params, dataset.num_classes(), dataset.feature_dim(), "training_loss_gradient");
    BatchGradient acc(params);
    for (const auto& seq : dataset.sequences()) {
        acc.add_sequence(params, windowed_features(seq.features(), params.context_radius), seq, weights);
    }
    ClassifierParams grad = params;
    const double scale = acc.frames ? 1.0 / static_cast<double>(acc.frames) : 0.0;
    grad.weights = acc.weights * scale;
    grad.bias = acc.bias * scale;
    return grad;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const EpochObserver& observer) {
    config.validate();
    if (dataset.empty()) throw ConfigError("train: empty dataset");
    const int L = dataset.num_classes();

    TrainResult result;
    result.stats = compute_transition_stats(dataset);
    result.params = ClassifierParams::zeros(L, dataset.feature_dim(), config.context_radius);
    result.multipliers = MultiplierState::zeros(L, config.gamma, config.epsilon);
    const auto& stats = result.stats;
    auto& params = result.params;

    const auto inputs = precompute_inputs(dataset, config.context_radius);
    const auto& seqs = dataset.sequences();
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.rng_seed);

    const SequencePredictor predictor = [&](const LabeledSequence& seq) {
        const auto n = static_cast<std::size_t>(&seq - seqs.data());
        return predict_inputs(params, inputs[n]);
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Gain from the multipliers measured at the end of the previous epoch.
        const GainWeights gain = config.loss_mode == LossMode::plain_ce
                                     ? unit_weights(L)
                                     : compute_gain(stats, result.multipliers, config.tau);

        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t epoch_frames = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_sequences)) {
            BatchGradient acc(params);
            const auto end = std::min(order.size(), b + static_cast<std::size_t>(config.batch_sequences));
            for (std::size_t n = b; n < end; ++n) acc.add_sequence(params, inputs[order[n]], seqs[order[n]], gain);
            const double step = config.learning_rate / static_cast<double>(acc.frames);
            params.weights -= step * acc.weights;
            params.bias -= step * acc.bias;
            epoch_loss += acc.loss;
            epoch_frames += acc.frames;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.mean_loss = epoch_loss / static_cast<double>(epoch_frames);
        if (!std::isfinite(record.mean_loss) || !params.weights.allFinite() || !params.bias.allFinite()) {
            throw DivergenceError(epoch, "train: loss became non-finite at epoch " + std::to_string(epoch) +
                                             " (mode " + to_string(config.loss_mode) + ", learning_rate " +
                                             std::to_string(config.learning_rate) + ")");
        }

        const ConfusionTensor confusion = compute_confusion(
            predictor, dataset, {config.confusion_subset, config.rng_seed + static_cast<std::uint64_t>(epoch)});
        const CountMatrix m = confusion.confusion_matrix();
        record.train_acc = static_cast<double>(m.diagonal().sum()) / static_cast<double>(confusion.total_frames());

        const MultiplierState before = result.multipliers;
        if (config.loss_mode != LossMode::plain_ce) {
            const LearningState state = learning_state(confusion, stats);
            if (config.loss_mode == LossMode::cost_sensitive) {
                result.multipliers = update_multipliers(result.multipliers, confusion, stats);
            } else {
                result.multipliers.detached_mean_trans_acc = state.mean_trans_acc;
            }
            record.has_multipliers = true;
            record.mean_trans_acc = state.mean_trans_acc;
            record.lagrangian = lagrangian_value(confusion, stats, result.multipliers);
            record.lambda = summarize_multipliers(result.multipliers, state, stats);
        }
        result.telemetry.push_back(record);
        if (observer) observer({epoch, gain, before, result.multipliers, confusion, params});
    }
    return result;
}

Label bayes_optimal_decision(const Eigen::Ref<const Eigen::VectorXd>& posteriors,
                             const Eigen::Ref<const Eigen::MatrixXd>& gain) {
    if (gain.rows() != posteriors.size() || gain.cols() != posteriors.size()) {
        throw ConfigError("bayes_optimal_decision: gain must be L x L");
    }
    const Eigen::VectorXd expected = gain.transpose() * posteriors;
    return argmax(expected);
}

Label bayes_optimal_decision_diagonal(const Eigen::Ref<const Eigen::VectorXd>& posteriors,
                                      const Eigen::Ref<const Eigen::VectorXd>& diagonal) {
    if (diagonal.size() != posteriors.size()) throw ConfigError("bayes_optimal_decision: length mismatch");
    return argmax(posteriors.cwiseProduct(diagonal));
}

Label bayes_optimal_decision(const Eigen::Ref<const Eigen::VectorXd>& posteriors,
                             const GainWeights& weights, Label u) {
    if (u < 0 || u > weights.num_classes()) throw RangeError("bayes_optimal_decision: previous action out of range");
    return bayes_optimal_decision_diagonal(posteriors, weights.tempered.col(u));
}

void save_checkpoint(const std::filesystem::path& path, const ClassifierParams& params, int epoch) {
    params.validate();
    nlohmann::ordered_json header;
    header["format"] = "ltseg-checkpoint-v1";
    header["num_classes"] = params.num_classes();
    header["feature_dim"] = params.feature_dim();
    header["context_radius"] = params.context_radius;
    header["epoch"] = epoch;
    header["payload"] = "float32-le weights[L][D*(2w+1)] then bias[L]";

    std::vector<float> payload;
    payload.reserve(static_cast<std::size_t>(params.weights.size() + params.bias.size()));
    for (Eigen::Index r = 0; r < params.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < params.weights.cols(); ++c)
            payload.push_back(static_cast<float>(params.weights(r, c)));
    for (Eigen::Index r = 0; r < params.bias.size(); ++r) payload.push_back(static_cast<float>(params.bias(r)));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    const std::string line = header.dump() + "\n";
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    static_assert(std::endian::native == std::endian::little);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw IoError("write failed for checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": offset 0: missing header line");
    nlohmann::json header;
    Checkpoint ckpt;
    int L = 0, D = 0, w = 0;
    try {
        header = nlohmann::json::parse(line);
        L = header.at("num_classes").get<int>();
        D = header.at("feature_dim").get<int>();
        w = header.at("context_radius").get<int>();
        ckpt.epoch = header.at("epoch").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": header: " + e.what());
    }
    ckpt.params = ClassifierParams::zeros(L, D, w);
    std::vector<float> payload(static_cast<std::size_t>(ckpt.params.weights.size() + ckpt.params.bias.size()));
    const auto bytes = static_cast<std::streamsize>(payload.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(payload.data()), bytes);
    if (in.gcount() != bytes) {
        throw ParseError(path.string() + ": offset " + std::to_string(line.size() + 1 + static_cast<std::size_t>(in.gcount())) +
                         ": payload truncated, expected " + std::to_string(bytes) + " bytes");
    }
    std::size_t n = 0;
    for (Eigen::Index r = 0; r < ckpt.params.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < ckpt.params.weights.cols(); ++c) ckpt.params.weights(r, c) = payload[n++];
    for (Eigen::Index r = 0; r < ckpt.params.bias.size(); ++r) ckpt.params.bias(r) = payload[n++];
    return ckpt;
}

}  // namespace ltseg

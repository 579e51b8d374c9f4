#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ltseg/confusion.hpp"
#include "ltseg/costsens.hpp"
#include "ltseg/seqdata.hpp"

namespace ltseg {

// Linear softmax over a window of 2w+1 frames centred on t. Windows that run
// past the sequence edges repeat the first/last frame.
struct ClassifierParams {
    Eigen::MatrixXd weights;  // L x (D * (2w + 1)), block o holds offset o - w
    Eigen::VectorXd bias;     // L
    int context_radius = 0;

    static ClassifierParams zeros(int num_classes, int feature_dim, int context_radius);

    int num_classes() const { return static_cast<int>(weights.rows()); }
    int input_dim() const { return static_cast<int>(weights.cols()); }
    int feature_dim() const { return input_dim() / (2 * context_radius + 1); }
    void validate() const;

    friend bool operator==(const ClassifierParams& a, const ClassifierParams& b) {
        return a.context_radius == b.context_radius && a.weights.rows() == b.weights.rows() &&
               a.weights.cols() == b.weights.cols() && a.weights == b.weights && a.bias == b.bias;
    }
};

// Windowed input of frame t, length D * (2 * radius + 1).
Eigen::VectorXd windowed_feature(const FeatureMatrix& features, std::size_t t, int radius);
// All windowed inputs of a sequence, one column per frame.
Eigen::MatrixXd windowed_features(const FeatureMatrix& features, int radius);

Eigen::VectorXd frame_logits(const ClassifierParams& params, const LabeledSequence& seq, std::size_t t);
// p(y_t | X); RangeError if t >= T.
Eigen::VectorXd forward(const ClassifierParams& params, const LabeledSequence& seq, std::size_t t);

// Index of the largest entry; ties go to the smallest index.
Label argmax(const Eigen::Ref<const Eigen::VectorXd>& values);

std::vector<Label> predict_sequence(const ClassifierParams& params, const LabeledSequence& seq);

ConfusionTensor compute_confusion(const ClassifierParams& params, const Dataset& dataset,
                                  const ConfusionOptions& options = {});

enum class LossMode { plain_ce, inverse_prior, cost_sensitive };

std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& name);

struct TrainConfig {
    int epochs = 60;
    double learning_rate = 0.05;
    int batch_sequences = 8;
    int context_radius = 1;
    double tau = kDefaultTau;
    double epsilon = kDefaultEpsilon;
    double gamma = kDefaultGamma;
    std::uint64_t rng_seed = 0;
    LossMode loss_mode = LossMode::cost_sensitive;
    // Fraction of training sequences used for the per-epoch confusion tensor.
    double confusion_subset = 1.0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;   // weighted loss averaged over training frames
    double train_acc = 0.0;   // frame accuracy of the epoch's confusion tensor
    bool has_multipliers = false;
    double lagrangian = 0.0;
    double mean_trans_acc = 0.0;
    MultiplierSummary lambda;

    // One JSON object; multiplier fields are omitted for plain_ce.
    std::string to_json() const;
};

// Everything the epoch loop saw, for observers that check the update order.
struct EpochTrace {
    int epoch;
    const GainWeights& gain_used;
    const MultiplierState& multipliers_before;
    const MultiplierState& multipliers_after;
    const ConfusionTensor& confusion;
    const ClassifierParams& params;
};

struct TrainResult {
    ClassifierParams params;
    std::vector<EpochRecord> telemetry;
    MultiplierState multipliers;
    TransitionStats stats;
};

using EpochObserver = std::function<void(const EpochTrace&)>;

// Each epoch: gain from the current multipliers, one pass of mini-batch SGD
// on the tempered weighted cross-entropy, confusion on the training set,
// then the projected multiplier step. plain_ce uses unit weights and never
// touches the multipliers; inverse_prior keeps lambda at zero.
// Throws DivergenceError if the epoch loss stops being finite.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const EpochObserver& observer = {});

// Mean weighted loss over every frame of the dataset and its gradient
// (same shapes as params).
double training_loss(const ClassifierParams& params, const Dataset& dataset, const GainWeights& weights);
ClassifierParams training_loss_gradient(const ClassifierParams& params, const Dataset& dataset,
                                        const GainWeights& weights);

// argmax_j sum_i posteriors_i * gain(i, j), ties to the smallest j.
Label bayes_optimal_decision(const Eigen::Ref<const Eigen::VectorXd>& posteriors,
                             const Eigen::Ref<const Eigen::MatrixXd>& gain);
// Diagonal gain: argmax_i posteriors_i * diagonal_i.
Label bayes_optimal_decision_diagonal(const Eigen::Ref<const Eigen::VectorXd>& posteriors,
                                      const Eigen::Ref<const Eigen::VectorXd>& diagonal);
// Uses the tempered weights of column u, the rule a classifier trained with
// those weights is calibrated for.
Label bayes_optimal_decision(const Eigen::Ref<const Eigen::VectorXd>& posteriors,
                             const GainWeights& weights, Label u);

// Checkpoint: one JSON header line {"num_classes", "feature_dim",
// "context_radius", "epoch", ...} then little-endian float32 weights
// (row-major) followed by the bias.
struct Checkpoint {
    ClassifierParams params;
    int epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ClassifierParams& params, int epoch);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ltseg

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ltseg/seqdata.hpp"

namespace ltseg {

using CountMatrix = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Frame counts of (truth i, prediction j, previous action k) triples,
// L x L x (L+1). Normalized entries are counts / total_frames.
class ConfusionTensor {
public:
    ConfusionTensor() = default;
    explicit ConfusionTensor(int num_classes);

    int num_classes() const { return num_classes_; }
    std::uint64_t total_frames() const { return total_frames_; }

    std::uint64_t count(Label truth, Label pred, Label prev) const { return counts_[index(truth, pred, prev)]; }
    double normalized(Label truth, Label pred, Label prev) const;

    void add(Label truth, Label pred, Label prev, std::uint64_t n = 1);
    // Element-wise sum; order of merges never matters.
    ConfusionTensor& operator+=(const ConfusionTensor& other);

    // M_{i,j} = sum_k C_{i,j,k}.
    CountMatrix confusion_matrix() const;
    // sum_j C_{i,j,k}, equal to the dataset's transition counts.
    CountMatrix transition_counts() const;

    // Rows "i,j,k,count" for every non-zero entry, with a header line.
    std::string to_csv() const;

    friend bool operator==(const ConfusionTensor&, const ConfusionTensor&) = default;

private:
    std::size_t index(Label i, Label j, Label k) const {
        const auto L = static_cast<std::size_t>(num_classes_);
        return (static_cast<std::size_t>(i) * L + static_cast<std::size_t>(j)) * (L + 1) +
               static_cast<std::size_t>(k);
    }

    int num_classes_ = 0;
    std::uint64_t total_frames_ = 0;
    std::vector<std::uint64_t> counts_;
};

// Per-frame class predictions for one sequence.
using SequencePredictor = std::function<std::vector<Label>(const LabeledSequence&)>;

struct ConfusionOptions {
    // Fraction of sequences counted (1.0 = full training set). Subsets are
    // drawn deterministically from subset_seed.
    double subset_fraction = 1.0;
    std::uint64_t subset_seed = 0;
};

// Counts every frame of the dataset (or a subset). Sequences are split
// across worker threads (see worker_count) and partial tensors summed.
ConfusionTensor compute_confusion(const SequencePredictor& predict, const Dataset& dataset,
                                  const ConfusionOptions& options = {});

// From precomputed per-sequence predictions, aligned with dataset.sequences().
ConfusionTensor compute_confusion(const std::vector<std::vector<Label>>& predictions,
                                  const Dataset& dataset);

// Accuracies derived from a confusion tensor. Entries without support are
// std::nullopt rather than NaN and are excluded from averages.
struct LearningState {
    std::vector<std::optional<double>> class_acc;  // L
    // L x (L+1), row-major (i * (L+1) + k); set only on valid transitions.
    std::vector<std::optional<double>> trans_acc;
    double mean_trans_acc = 0.0;
    int num_classes = 0;

    const std::optional<double>& transition(Label i, Label k) const {
        return trans_acc[static_cast<std::size_t>(i) * static_cast<std::size_t>(num_classes + 1) +
                         static_cast<std::size_t>(k)];
    }
};

LearningState learning_state(const ConfusionTensor& confusion, const TransitionStats& stats);

// Worker count for parallel folds: LTSEG_THREADS if set (>= 1), else the
// hardware concurrency.
unsigned worker_count();

}  // namespace ltseg

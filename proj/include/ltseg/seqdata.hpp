#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ltseg {

// Class id in [0, L). Previous-action ids live in [0, L] where L is 'start'.
using Label = int;

// Column-major D x T matrix: column t is the feature vector of frame t.
using FeatureMatrix = Eigen::MatrixXf;

struct Segment {
    std::size_t start = 0;  // first frame
    std::size_t end = 0;    // last frame, inclusive
    Label label = 0;

    std::size_t length() const { return end - start + 1; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

using Segmentation = std::vector<Segment>;

// Run-length encodes frame labels into maximal constant-label segments.
// Throws EmptySequenceError on empty input.
Segmentation segmentation_from_frames(std::span<const Label> frame_labels);

std::vector<Label> expand_segmentation(const Segmentation& segments);

// Label string of a segmentation (durations dropped).
std::vector<Label> segment_labels(const Segmentation& segments);

class LabeledSequence {
public:
    // Validates shapes and label range, then derives the segmentation and
    // the per-frame previous action (num_classes encodes 'start').
    LabeledSequence(std::string id, FeatureMatrix features,
                    std::vector<Label> frame_labels, int num_classes);

    const std::string& id() const { return id_; }
    const FeatureMatrix& features() const { return features_; }
    const std::vector<Label>& frame_labels() const { return frame_labels_; }
    const std::vector<Label>& prev_action() const { return prev_action_; }
    const Segmentation& segmentation() const { return segmentation_; }
    int num_classes() const { return num_classes_; }
    std::size_t num_frames() const { return frame_labels_.size(); }
    int feature_dim() const { return static_cast<int>(features_.rows()); }

    friend bool operator==(const LabeledSequence& a, const LabeledSequence& b);

private:
    std::string id_;
    FeatureMatrix features_;
    std::vector<Label> frame_labels_;
    std::vector<Label> prev_action_;
    Segmentation segmentation_;
    int num_classes_;
};

class Dataset {
public:
    // Class names default to "action_00", "action_01", ...
    Dataset(std::vector<LabeledSequence> sequences, int num_classes, int feature_dim,
            std::vector<std::string> class_names = {});

    const std::vector<LabeledSequence>& sequences() const { return sequences_; }
    int num_classes() const { return num_classes_; }
    int feature_dim() const { return feature_dim_; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    const std::vector<std::uint64_t>& class_frame_counts() const { return class_frame_counts_; }
    std::uint64_t total_frames() const { return total_frames_; }
    bool empty() const { return sequences_.empty(); }

    // Classes with zero frames; permitted, excluded from per-class averages.
    std::vector<Label> absent_classes() const;

    friend bool operator==(const Dataset& a, const Dataset& b);

private:
    std::vector<LabeledSequence> sequences_;
    int num_classes_;
    int feature_dim_;
    std::vector<std::string> class_names_;
    std::vector<std::uint64_t> class_frame_counts_;
    std::uint64_t total_frames_ = 0;
};

std::string default_class_name(Label c);

// ---------------------------------------------------------------------------
// Synthetic long-tailed datasets

struct SynthConfig {
    int num_classes = 12;
    int feature_dim = 16;
    int num_sequences = 200;
    double mean_segments_per_sequence = 8.0;
    // Zipf exponent of the class prior: prior_r ~ 1 / (r + 1)^class_skew.
    double class_skew = 1.5;
    // Mean segment length (frames) of the most frequent class; class i uses
    // duration_mean * (prior_i / prior_0)^duration_skew unless
    // class_duration_means is given.
    double duration_mean = 20.0;
    double duration_skew = 0.0;
    std::vector<double> class_duration_means;
    // Relative standard deviation of segment lengths.
    double duration_spread = 0.3;
    // Emitter means are drawn N(0, mean_scale^2 I) unless given explicitly
    // (one vector of length feature_dim per class).
    double mean_scale = 1.0;
    std::vector<std::vector<double>> emitter_means;
    // Shared isotropic Gaussian noise; 0 yields noiseless emitters.
    double noise_scale = 1.0;
    // Log-normal spread of predecessor preferences; 0 makes successors
    // follow the class prior.
    double transition_skew = 1.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Generative parameters shared by every split sampled from one config.
struct SyntheticWorld {
    int num_classes = 0;
    int feature_dim = 0;
    Eigen::VectorXd prior;             // L
    Eigen::MatrixXd successor;         // (L+1) x L, row k = p(next | previous k)
    Eigen::MatrixXd emitter_means;     // D x L
    Eigen::VectorXd duration_means;    // L
    double duration_spread = 0.0;
    double noise_scale = 0.0;
    double mean_segments_per_sequence = 1.0;
};

SyntheticWorld make_synthetic_world(const SynthConfig& config);

// Samples sequences "<id_prefix><n>" from a world; deterministic in seed.
Dataset sample_synthetic(const SyntheticWorld& world, int num_sequences, std::uint64_t seed,
                         const std::string& id_prefix = "seq_");

// make_synthetic_world + sample_synthetic(config.num_sequences, config.rng_seed).
Dataset generate_synthetic(const SynthConfig& config);

// ---------------------------------------------------------------------------
// Dataset-level transition statistics

struct TransitionStats {
    int num_classes = 0;
    std::uint64_t total_frames = 0;
    // Raw frame counts of (truth i, previous action k), L x (L+1).
    Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
    Eigen::MatrixXd transition;  // counts / total_frames
    Eigen::VectorXd prior;       // row sums of transition
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid_mask;

    int start_index() const { return num_classes; }
    bool valid(Label i, Label k) const { return valid_mask(i, k); }
    std::size_t num_valid() const;
};

TransitionStats compute_transition_stats(const Dataset& dataset);

struct HeadTailSplit {
    std::vector<Label> head;
    std::vector<Label> tail;
};

// head = { i : count_i >= threshold }, tail = the rest.
HeadTailSplit head_tail_split(std::span<const std::uint64_t> class_frame_counts,
                              double threshold);

}  // namespace ltseg

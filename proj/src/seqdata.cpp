#include "ltseg/seqdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "ltseg/error.hpp"

namespace ltseg {

Segmentation segmentation_from_frames(std::span<const Label> frame_labels) {
    if (frame_labels.empty()) {
        throw EmptySequenceError("segmentation_from_frames: empty label sequence");
    }
    Segmentation segments;
    std::size_t start = 0;
    for (std::size_t t = 1; t <= frame_labels.size(); ++t) {
        if (t == frame_labels.size() || frame_labels[t] != frame_labels[start]) {
            segments.push_back({start, t - 1, frame_labels[start]});
            start = t;
        }
    }
    return segments;
}

std::vector<Label> expand_segmentation(const Segmentation& segments) {
    std::vector<Label> frames;
    for (const auto& s : segments) {
        frames.insert(frames.end(), s.length(), s.label);
    }
    return frames;
}

std::vector<Label> segment_labels(const Segmentation& segments) {
    std::vector<Label> labels;
    labels.reserve(segments.size());
    for (const auto& s : segments) labels.push_back(s.label);
    return labels;
}

LabeledSequence::LabeledSequence(std::string id, FeatureMatrix features,
                                 std::vector<Label> frame_labels, int num_classes)
    : id_(std::move(id)),
      features_(std::move(features)),
      frame_labels_(std::move(frame_labels)),
      num_classes_(num_classes) {
    if (num_classes_ <= 0) throw ConfigError("sequence '" + id_ + "': num_classes must be positive");
    if (frame_labels_.empty()) throw EmptySequenceError("sequence '" + id_ + "' has no frames");
    if (features_.rows() == 0) throw ConfigError("sequence '" + id_ + "': feature dimension is 0");
    if (static_cast<std::size_t>(features_.cols()) != frame_labels_.size()) {
        throw ConfigError("sequence '" + id_ + "': feature frame count " +
                          std::to_string(features_.cols()) + " != label frame count " +
                          std::to_string(frame_labels_.size()));
    }
    if (!features_.allFinite()) throw ConfigError("sequence '" + id_ + "': non-finite feature");
    for (std::size_t t = 0; t < frame_labels_.size(); ++t) {
        const Label y = frame_labels_[t];
        if (y < 0 || y >= num_classes_) {
            throw RangeError("sequence '" + id_ + "': label " + std::to_string(y) + " at frame " +
                             std::to_string(t) + " outside [0, " + std::to_string(num_classes_) + ")");
        }
    }
    segmentation_ = segmentation_from_frames(frame_labels_);
    prev_action_.resize(frame_labels_.size());
    Label previous = num_classes_;
    for (const auto& s : segmentation_) {
        std::fill(prev_action_.begin() + static_cast<std::ptrdiff_t>(s.start),
                  prev_action_.begin() + static_cast<std::ptrdiff_t>(s.end + 1), previous);
        previous = s.label;
    }
}

bool operator==(const LabeledSequence& a, const LabeledSequence& b) {
    return a.id_ == b.id_ && a.num_classes_ == b.num_classes_ &&
           a.frame_labels_ == b.frame_labels_ && a.features_.rows() == b.features_.rows() &&
           a.features_.cols() == b.features_.cols() && a.features_ == b.features_;
}

std::string default_class_name(Label c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "action_%02d", c);
    return buf;
}

Dataset::Dataset(std::vector<LabeledSequence> sequences, int num_classes, int feature_dim,
                 std::vector<std::string> class_names)
    : sequences_(std::move(sequences)),
      num_classes_(num_classes),
      feature_dim_(feature_dim),
      class_names_(std::move(class_names)) {
    if (num_classes_ <= 0 || feature_dim_ <= 0) {
        throw ConfigError("dataset: num_classes and feature_dim must be positive");
    }
    if (class_names_.empty()) {
        for (Label c = 0; c < num_classes_; ++c) class_names_.push_back(default_class_name(c));
    }
    if (static_cast<int>(class_names_.size()) != num_classes_) {
        throw ConfigError("dataset: " + std::to_string(class_names_.size()) +
                          " class names for " + std::to_string(num_classes_) + " classes");
    }
    class_frame_counts_.assign(static_cast<std::size_t>(num_classes_), 0);
    for (const auto& seq : sequences_) {
        if (seq.num_classes() != num_classes_ || seq.feature_dim() != feature_dim_) {
            throw ConfigError("dataset: sequence '" + seq.id() + "' has L=" +
                              std::to_string(seq.num_classes()) + ", D=" +
                              std::to_string(seq.feature_dim()) + "; expected L=" +
                              std::to_string(num_classes_) + ", D=" + std::to_string(feature_dim_));
        }
        for (Label y : seq.frame_labels()) ++class_frame_counts_[static_cast<std::size_t>(y)];
        total_frames_ += seq.num_frames();
    }
}

std::vector<Label> Dataset::absent_classes() const {
    std::vector<Label> absent;
    for (Label c = 0; c < num_classes_; ++c) {
        if (class_frame_counts_[static_cast<std::size_t>(c)] == 0) absent.push_back(c);
    }
    return absent;
}

bool operator==(const Dataset& a, const Dataset& b) {
    return a.num_classes_ == b.num_classes_ && a.feature_dim_ == b.feature_dim_ &&
           a.class_names_ == b.class_names_ && a.sequences_ == b.sequences_;
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
    if (num_classes <= 0) throw ConfigError("synthetic: num_classes must be positive");
    if (feature_dim <= 0) throw ConfigError("synthetic: feature_dim must be positive");
    if (num_sequences <= 0) throw ConfigError("synthetic: num_sequences must be positive");
    if (!(mean_segments_per_sequence >= 1.0)) {
        throw ConfigError("synthetic: mean_segments_per_sequence must be >= 1");
    }
    if (!(class_skew >= 0.0) || !(transition_skew >= 0.0) || !(duration_skew >= 0.0)) {
        throw ConfigError("synthetic: skew parameters must be >= 0");
    }
    if (!(duration_mean >= 1.0)) throw ConfigError("synthetic: duration_mean must be >= 1");
    if (!(duration_spread >= 0.0)) throw ConfigError("synthetic: duration_spread must be >= 0");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
        throw ConfigError("synthetic: noise_scale must be finite and >= 0");
    }
    if (!(mean_scale >= 0.0)) throw ConfigError("synthetic: mean_scale must be >= 0");
    if (!class_duration_means.empty()) {
        if (static_cast<int>(class_duration_means.size()) != num_classes) {
            throw ConfigError("synthetic: class_duration_means needs one entry per class");
        }
        for (double d : class_duration_means) {
            if (!(d >= 1.0)) throw ConfigError("synthetic: class duration means must be >= 1");
        }
    }
    if (!emitter_means.empty()) {
        if (static_cast<int>(emitter_means.size()) != num_classes) {
            throw ConfigError("synthetic: emitter_means needs one vector per class");
        }
        for (const auto& m : emitter_means) {
            if (static_cast<int>(m.size()) != feature_dim) {
                throw ConfigError("synthetic: emitter mean length != feature_dim");
            }
        }
    }
}

namespace {

// Separate streams for world parameters and per-split sampling.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

Label sample_row(const Eigen::MatrixXd& probs, Eigen::Index row, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double r = uni(rng);
    double acc = 0.0;
    Label last_positive = 0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        if (probs(row, c) <= 0.0) continue;
        acc += probs(row, c);
        last_positive = static_cast<Label>(c);
        if (r < acc) return last_positive;
    }
    return last_positive;
}

}  // namespace

SyntheticWorld make_synthetic_world(const SynthConfig& config) {
    config.validate();
    const int L = config.num_classes;
    const int D = config.feature_dim;
    auto rng = make_rng(config.rng_seed, 0x5eed'0001);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticWorld world;
    world.num_classes = L;
    world.feature_dim = D;
    world.duration_spread = config.duration_spread;
    world.noise_scale = config.noise_scale;
    world.mean_segments_per_sequence = config.mean_segments_per_sequence;

    world.prior.resize(L);
    for (int i = 0; i < L; ++i) world.prior(i) = std::pow(static_cast<double>(i + 1), -config.class_skew);
    world.prior /= world.prior.sum();

    world.emitter_means.resize(D, L);
    for (int i = 0; i < L; ++i) {
        for (int d = 0; d < D; ++d) {
            world.emitter_means(d, i) = config.emitter_means.empty()
                                            ? config.mean_scale * normal(rng)
                                            : config.emitter_means[static_cast<std::size_t>(i)]
                                                                  [static_cast<std::size_t>(d)];
        }
    }

    world.duration_means.resize(L);
    for (int i = 0; i < L; ++i) {
        world.duration_means(i) =
            config.class_duration_means.empty()
                ? std::max(1.0, config.duration_mean *
                                    std::pow(world.prior(i) / world.prior(0), config.duration_skew))
                : config.class_duration_means[static_cast<std::size_t>(i)];
    }

    // Row k: successor distribution after previous action k (row L is 'start').
    // Log-normal preference factors let a few predecessors dominate each class.
    world.successor.resize(L + 1, L);
    for (int k = 0; k <= L; ++k) {
        for (int i = 0; i < L; ++i) {
            const double pref = std::exp(config.transition_skew * normal(rng));
            world.successor(k, i) = (i == k) ? 0.0 : world.prior(i) * pref;
        }
        const double total = world.successor.row(k).sum();
        if (total > 0.0) world.successor.row(k) /= total;
    }
    return world;
}

Dataset sample_synthetic(const SyntheticWorld& world, int num_sequences, std::uint64_t seed,
                         const std::string& id_prefix) {
    if (num_sequences <= 0) throw ConfigError("synthetic: num_sequences must be positive");
    const int L = world.num_classes;
    const int D = world.feature_dim;
    auto rng = make_rng(seed, 0x5eed'0002);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::poisson_distribution<int> extra_segments(world.mean_segments_per_sequence - 1.0);

    const int width = static_cast<int>(std::to_string(num_sequences - 1).size());
    std::vector<LabeledSequence> sequences;
    sequences.reserve(static_cast<std::size_t>(num_sequences));
    for (int n = 0; n < num_sequences; ++n) {
        const int num_segments = 1 + (world.mean_segments_per_sequence > 1.0 ? extra_segments(rng) : 0);
        std::vector<Label> labels;
        Label previous = L;
        for (int s = 0; s < num_segments; ++s) {
            // L == 1 has no valid successor after the first segment.
            if (previous != L && L == 1) break;
            const Label label = sample_row(world.successor, previous, rng);
            const double mean = world.duration_means(label);
            const double len = std::round(mean + world.duration_spread * mean * normal(rng));
            labels.insert(labels.end(), static_cast<std::size_t>(std::max(1.0, len)), label);
            previous = label;
        }
        FeatureMatrix features(D, static_cast<Eigen::Index>(labels.size()));
        for (std::size_t t = 0; t < labels.size(); ++t) {
            for (int d = 0; d < D; ++d) {
                const double v = world.emitter_means(d, labels[t]) + world.noise_scale * normal(rng);
                features(d, static_cast<Eigen::Index>(t)) = static_cast<float>(v);
            }
        }
        std::string idx = std::to_string(n);
        idx.insert(0, static_cast<std::size_t>(width) - idx.size(), '0');
        sequences.emplace_back(id_prefix + idx, std::move(features), std::move(labels), L);
    }
    return Dataset(std::move(sequences), L, D);
}

Dataset generate_synthetic(const SynthConfig& config) {
    return sample_synthetic(make_synthetic_world(config), config.num_sequences, config.rng_seed);
}

// ---------------------------------------------------------------------------

std::size_t TransitionStats::num_valid() const {
    return static_cast<std::size_t>(valid_mask.count());
}

TransitionStats compute_transition_stats(const Dataset& dataset) {
    if (dataset.empty()) throw ConfigError("compute_transition_stats: empty dataset");
    const int L = dataset.num_classes();
    TransitionStats stats;
    stats.num_classes = L;
    stats.counts.setZero(L, L + 1);
    for (const auto& seq : dataset.sequences()) {
        const auto& y = seq.frame_labels();
        const auto& u = seq.prev_action();
        for (std::size_t t = 0; t < y.size(); ++t) ++stats.counts(y[t], u[t]);
    }
    stats.total_frames = dataset.total_frames();
    const double total = static_cast<double>(stats.total_frames);
    stats.transition = stats.counts.cast<double>() / total;
    stats.prior = stats.transition.rowwise().sum();
    stats.valid_mask = stats.counts.array() > 0;
    return stats;
}

HeadTailSplit head_tail_split(std::span<const std::uint64_t> class_frame_counts, double threshold) {
    if (!(threshold > 0.0)) throw ConfigError("head_tail_split: threshold must be positive");
    HeadTailSplit split;
    for (std::size_t i = 0; i < class_frame_counts.size(); ++i) {
        auto& group = static_cast<double>(class_frame_counts[i]) >= threshold ? split.head : split.tail;
        group.push_back(static_cast<Label>(i));
    }
    return split;
}

}  // namespace ltseg

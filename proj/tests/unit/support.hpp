#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "ltseg/seqdata.hpp"

namespace ltseg::testing {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Frame labels built from random runs (adjacent runs may repeat a label).
inline std::vector<Label> random_labels(Rng& rng, int num_classes, std::size_t max_frames,
                                        int max_run = 6) {
    const auto frames = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(max_frames)));
    std::vector<Label> y;
    while (y.size() < frames) {
        const Label c = uniform_int(rng, 0, num_classes - 1);
        const int run = uniform_int(rng, 1, max_run);
        for (int r = 0; r < run && y.size() < frames; ++r) y.push_back(c);
    }
    return y;
}

inline FeatureMatrix random_features(Rng& rng, int dim, std::size_t frames) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    FeatureMatrix f(dim, static_cast<Eigen::Index>(frames));
    for (Eigen::Index t = 0; t < f.cols(); ++t)
        for (Eigen::Index d = 0; d < f.rows(); ++d) f(d, t) = n(rng);
    return f;
}

inline Dataset random_dataset(Rng& rng, int num_classes, int dim, int max_sequences,
                              std::size_t max_frames) {
    const int n = uniform_int(rng, 1, max_sequences);
    std::vector<LabeledSequence> seqs;
    for (int s = 0; s < n; ++s) {
        auto y = random_labels(rng, num_classes, max_frames);
        auto f = random_features(rng, dim, y.size());
        seqs.emplace_back("s" + std::to_string(s), std::move(f), std::move(y), num_classes);
    }
    return Dataset(std::move(seqs), num_classes, dim);
}

// One sequence with the given labels and constant zero features.
inline LabeledSequence sequence_of(std::vector<Label> y, int num_classes, int dim = 1,
                                   const std::string& id = "s") {
    FeatureMatrix f = FeatureMatrix::Zero(dim, static_cast<Eigen::Index>(y.size()));
    return LabeledSequence(id, std::move(f), std::move(y), num_classes);
}

inline Dataset dataset_of(std::vector<std::vector<Label>> labels, int num_classes, int dim = 1) {
    std::vector<LabeledSequence> seqs;
    for (std::size_t n = 0; n < labels.size(); ++n)
        seqs.push_back(sequence_of(std::move(labels[n]), num_classes, dim, "s" + std::to_string(n)));
    return Dataset(std::move(seqs), num_classes, dim);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ltseg-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace ltseg::testing

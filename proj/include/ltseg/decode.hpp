#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "ltseg/seqdata.hpp"

namespace ltseg {

// Per-class mean representations (nearest-class-mean prototypes).
struct ClassMeans {
    Eigen::MatrixXd means;               // L x R
    std::vector<std::uint64_t> support;  // frames averaged per class

    bool usable(Label c) const { return support[static_cast<std::size_t>(c)] > 0; }
    int num_classes() const { return static_cast<int>(means.rows()); }
};

// R x T representation matrix of one sequence.
using RepresentationFn = std::function<Eigen::MatrixXd(const LabeledSequence&)>;

// Windowed input features, the representation the linear classifier sees.
RepresentationFn windowed_representation(int context_radius);

ClassMeans compute_class_means(const Dataset& train, const RepresentationFn& represent);

// Per-frame nearest usable mean under squared Euclidean distance; ties go to
// the smallest class id. ConfigError if no class is usable.
std::vector<Label> ncm_predict(const ClassMeans& means, const Eigen::Ref<const Eigen::MatrixXd>& representations);

// Every t in [0, T-2] with pred[t] != pred[t+1].
std::vector<std::size_t> segment_boundaries(std::span<const Label> predictions);

// Labels each maximal run of classifier_pred with the mode of ncm_pred over
// that run (ties to the smallest class id).
std::vector<Label> sncm_decode(std::span<const Label> classifier_pred, std::span<const Label> ncm_pred);

}  // namespace ltseg

#include "ltseg/decode.hpp"

#include <limits>
#include <map>

#include "ltseg/classifier.hpp"
#include "ltseg/error.hpp"

namespace ltseg {

RepresentationFn windowed_representation(int context_radius) {
    return [context_radius](const LabeledSequence& seq) {
        return windowed_features(seq.features(), context_radius);
    };
}

ClassMeans compute_class_means(const Dataset& train, const RepresentationFn& represent) {
    if (train.empty()) throw ConfigError("compute_class_means: empty dataset");
    const int L = train.num_classes();
    ClassMeans out;
    out.support.assign(static_cast<std::size_t>(L), 0);
    Eigen::MatrixXd sums;
    for (const auto& seq : train.sequences()) {
        const Eigen::MatrixXd rep = represent(seq);
        if (static_cast<std::size_t>(rep.cols()) != seq.num_frames()) {
            throw ConfigError("compute_class_means: representation has " + std::to_string(rep.cols()) +
                              " columns for " + std::to_string(seq.num_frames()) + " frames");
        }
        if (sums.size() == 0) sums = Eigen::MatrixXd::Zero(L, rep.rows());
        if (rep.rows() != sums.cols()) throw ConfigError("compute_class_means: inconsistent representation size");
        const auto& y = seq.frame_labels();
        for (Eigen::Index t = 0; t < rep.cols(); ++t) {
            sums.row(y[static_cast<std::size_t>(t)]) += rep.col(t).transpose();
            ++out.support[static_cast<std::size_t>(y[static_cast<std::size_t>(t)])];
        }
    }
    out.means = Eigen::MatrixXd::Zero(L, sums.cols());
    for (Label c = 0; c < L; ++c) {
        if (out.usable(c)) out.means.row(c) = sums.row(c) / static_cast<double>(out.support[static_cast<std::size_t>(c)]);
    }
    return out;
}

std::vector<Label> ncm_predict(const ClassMeans& means, const Eigen::Ref<const Eigen::MatrixXd>& representations) {
    const int L = means.num_classes();
    bool any = false;
    for (Label c = 0; c < L; ++c) any = any || means.usable(c);
    if (!any) throw ConfigError("ncm_predict: no class has a usable mean");
    if (representations.rows() != means.means.cols()) {
        throw ConfigError("ncm_predict: representation size " + std::to_string(representations.rows()) +
                          " != mean size " + std::to_string(means.means.cols()));
    }
    std::vector<Label> labels(static_cast<std::size_t>(representations.cols()));
    for (Eigen::Index t = 0; t < representations.cols(); ++t) {
        double best = std::numeric_limits<double>::infinity();
        Label best_c = -1;
        for (Label c = 0; c < L; ++c) {
            if (!means.usable(c)) continue;
            const double d = (means.means.row(c).transpose() - representations.col(t)).squaredNorm();
            if (d < best || best_c < 0) {
                best = d;
                best_c = c;
            }
        }
        labels[static_cast<std::size_t>(t)] = best_c;
    }
    return labels;
}

std::vector<std::size_t> segment_boundaries(std::span<const Label> predictions) {
    std::vector<std::size_t> b;
    for (std::size_t t = 0; t + 1 < predictions.size(); ++t) {
        if (predictions[t] != predictions[t + 1]) b.push_back(t);
    }
    return b;
}

std::vector<Label> sncm_decode(std::span<const Label> classifier_pred, std::span<const Label> ncm_pred) {
    if (classifier_pred.size() != ncm_pred.size()) {
        throw ConfigError("sncm_decode: classifier predictions have " + std::to_string(classifier_pred.size()) +
                          " frames, NCM predictions " + std::to_string(ncm_pred.size()));
    }
    std::vector<Label> out(classifier_pred.size());
    std::size_t start = 0;
    auto fill_run = [&](std::size_t end) {  // [start, end]
        std::map<Label, std::size_t> votes;
        for (std::size_t t = start; t <= end; ++t) ++votes[ncm_pred[t]];
        Label mode = votes.begin()->first;
        std::size_t best = 0;
        for (const auto& [label, n] : votes) {  // ascending label order
            if (n > best) {
                best = n;
                mode = label;
            }
        }
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(start), out.begin() + static_cast<std::ptrdiff_t>(end + 1), mode);
    };
    for (std::size_t b : segment_boundaries(classifier_pred)) {
        fill_run(b);
        start = b + 1;
    }
    if (!classifier_pred.empty()) fill_run(classifier_pred.size() - 1);
    return out;
}

}  // namespace ltseg

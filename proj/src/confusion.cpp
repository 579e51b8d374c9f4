#include "ltseg/confusion.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "ltseg/error.hpp"

namespace ltseg {

ConfusionTensor::ConfusionTensor(int num_classes) : num_classes_(num_classes) {
    if (num_classes <= 0) throw ConfigError("ConfusionTensor: num_classes must be positive");
    const auto L = static_cast<std::size_t>(num_classes);
    counts_.assign(L * L * (L + 1), 0);
}

double ConfusionTensor::normalized(Label truth, Label pred, Label prev) const {
    if (total_frames_ == 0) return 0.0;
    return static_cast<double>(count(truth, pred, prev)) / static_cast<double>(total_frames_);
}

void ConfusionTensor::add(Label truth, Label pred, Label prev, std::uint64_t n) {
    if (truth < 0 || truth >= num_classes_ || pred < 0 || pred >= num_classes_ || prev < 0 ||
        prev > num_classes_) {
        throw RangeError("ConfusionTensor::add: index (" + std::to_string(truth) + ", " +
                         std::to_string(pred) + ", " + std::to_string(prev) + ") out of range");
    }
    counts_[index(truth, pred, prev)] += n;
    total_frames_ += n;
}

ConfusionTensor& ConfusionTensor::operator+=(const ConfusionTensor& other) {
    if (other.num_classes_ != num_classes_) {
        throw ConfigError("ConfusionTensor: cannot merge tensors with different class counts");
    }
    for (std::size_t n = 0; n < counts_.size(); ++n) counts_[n] += other.counts_[n];
    total_frames_ += other.total_frames_;
    return *this;
}

CountMatrix ConfusionTensor::confusion_matrix() const {
    CountMatrix m = CountMatrix::Zero(num_classes_, num_classes_);
    for (Label i = 0; i < num_classes_; ++i)
        for (Label j = 0; j < num_classes_; ++j)
            for (Label k = 0; k <= num_classes_; ++k) m(i, j) += count(i, j, k);
    return m;
}

CountMatrix ConfusionTensor::transition_counts() const {
    CountMatrix m = CountMatrix::Zero(num_classes_, num_classes_ + 1);
    for (Label i = 0; i < num_classes_; ++i)
        for (Label j = 0; j < num_classes_; ++j)
            for (Label k = 0; k <= num_classes_; ++k) m(i, k) += count(i, j, k);
    return m;
}

std::string ConfusionTensor::to_csv() const {
    std::ostringstream ss;
    ss << "i,j,k,count\n";
    for (Label i = 0; i < num_classes_; ++i)
        for (Label j = 0; j < num_classes_; ++j)
            for (Label k = 0; k <= num_classes_; ++k)
                if (const auto c = count(i, j, k)) ss << i << ',' << j << ',' << k << ',' << c << '\n';
    return ss.str();
}

unsigned worker_count() {
    if (const char* env = std::getenv("LTSEG_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

void tally(const LabeledSequence& seq, std::span<const Label> pred, ConfusionTensor& out) {
    if (pred.size() != seq.num_frames()) {
        throw ConfigError("compute_confusion: sequence '" + seq.id() + "' has " +
                          std::to_string(seq.num_frames()) + " frames but " +
                          std::to_string(pred.size()) + " predictions");
    }
    const auto& y = seq.frame_labels();
    const auto& u = seq.prev_action();
    for (std::size_t t = 0; t < pred.size(); ++t) out.add(y[t], pred[t], u[t]);
}

}  // namespace

ConfusionTensor compute_confusion(const SequencePredictor& predict, const Dataset& dataset,
                                  const ConfusionOptions& options) {
    if (!(options.subset_fraction > 0.0 && options.subset_fraction <= 1.0)) {
        throw ConfigError("compute_confusion: subset_fraction must be in (0, 1]");
    }
    const auto& seqs = dataset.sequences();
    std::vector<std::size_t> chosen(seqs.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    if (options.subset_fraction < 1.0 && !chosen.empty()) {
        std::mt19937_64 rng(options.subset_seed);
        std::shuffle(chosen.begin(), chosen.end(), rng);
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(options.subset_fraction * static_cast<double>(chosen.size())));
        chosen.resize(keep);
        std::sort(chosen.begin(), chosen.end());
    }

    const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max<std::size_t>(1, chosen.size())));
    std::vector<ConfusionTensor> partial(workers, ConfusionTensor(dataset.num_classes()));
    auto run = [&](unsigned w) {
        for (std::size_t n = w; n < chosen.size(); n += workers) {
            const auto& seq = seqs[chosen[n]];
            tally(seq, predict(seq), partial[w]);
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                try {
                    run(w);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : threads) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    ConfusionTensor total(dataset.num_classes());
    for (const auto& p : partial) total += p;
    return total;
}

ConfusionTensor compute_confusion(const std::vector<std::vector<Label>>& predictions,
                                  const Dataset& dataset) {
    if (predictions.size() != dataset.sequences().size()) {
        throw ConfigError("compute_confusion: " + std::to_string(predictions.size()) +
                          " prediction vectors for " + std::to_string(dataset.sequences().size()) +
                          " sequences");
    }
    ConfusionTensor total(dataset.num_classes());
    for (std::size_t n = 0; n < predictions.size(); ++n) {
        tally(dataset.sequences()[n], predictions[n], total);
    }
    return total;
}

LearningState learning_state(const ConfusionTensor& confusion, const TransitionStats& stats) {
    const int L = confusion.num_classes();
    if (stats.num_classes != L) throw ConfigError("learning_state: class count mismatch");
    LearningState state;
    state.num_classes = L;
    state.class_acc.assign(static_cast<std::size_t>(L), std::nullopt);
    state.trans_acc.assign(static_cast<std::size_t>(L) * static_cast<std::size_t>(L + 1), std::nullopt);

    double trans_sum = 0.0;
    std::size_t trans_n = 0;
    for (Label i = 0; i < L; ++i) {
        std::uint64_t correct = 0;
        std::uint64_t support = 0;
        for (Label k = 0; k <= L; ++k) {
            std::uint64_t row = 0;
            for (Label j = 0; j < L; ++j) row += confusion.count(i, j, k);
            const std::uint64_t hit = confusion.count(i, i, k);
            correct += hit;
            support += row;
            if (stats.valid(i, k) && row > 0) {
                const double acc = static_cast<double>(hit) / static_cast<double>(row);
                state.trans_acc[static_cast<std::size_t>(i) * static_cast<std::size_t>(L + 1) +
                                static_cast<std::size_t>(k)] = acc;
                trans_sum += acc;
                ++trans_n;
            }
        }
        if (support > 0) state.class_acc[static_cast<std::size_t>(i)] =
            static_cast<double>(correct) / static_cast<double>(support);
    }
    state.mean_trans_acc = trans_n ? trans_sum / static_cast<double>(trans_n) : 0.0;
    return state;
}

}  // namespace ltseg

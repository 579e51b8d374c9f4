#include "ltseg/costsens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ltseg/error.hpp"

namespace ltseg {

MultiplierState MultiplierState::zeros(int num_classes, double step_size, double epsilon) {
    MultiplierState m;
    m.lambda = Eigen::MatrixXd::Zero(num_classes, num_classes + 1);
    m.step_size = step_size;
    m.epsilon = epsilon;
    m.validate();
    return m;
}

void MultiplierState::validate() const {
    if (lambda.rows() <= 0 || lambda.cols() != lambda.rows() + 1) {
        throw ConfigError("MultiplierState: lambda must be L x (L+1)");
    }
    if (!(step_size > 0.0)) throw ConfigError("MultiplierState: step size must be positive");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("MultiplierState: epsilon must be in (0, 1]");
    if (!lambda.allFinite() || (lambda.array() < 0.0).any()) {
        throw ConfigError("MultiplierState: lambda must be finite and non-negative");
    }
}

GainWeights unit_weights(int num_classes) {
    GainWeights w;
    w.gain = Eigen::MatrixXd::Ones(num_classes, num_classes + 1);
    w.tempered = w.gain;
    w.tau = 0.0;
    w.active.assign(static_cast<std::size_t>(num_classes), true);
    return w;
}

GainWeights compute_gain(const TransitionStats& stats, const MultiplierState& mult, double tau,
                         std::optional<std::vector<bool>> active) {
    const int L = stats.num_classes;
    if (mult.num_classes() != L) throw ConfigError("compute_gain: multiplier shape mismatch");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("compute_gain: tau must be finite and >= 0");
    GainWeights w;
    w.tau = tau;
    if (active) {
        if (static_cast<int>(active->size()) != L) throw ConfigError("compute_gain: active mask size != L");
        w.active = std::move(*active);
    } else {
        w.active.resize(static_cast<std::size_t>(L));
        for (Label i = 0; i < L; ++i) w.active[static_cast<std::size_t>(i)] = stats.prior(i) > 0.0;
    }
    w.gain = Eigen::MatrixXd::Zero(L, L + 1);
    w.tempered = Eigen::MatrixXd::Zero(L, L + 1);
    for (Label i = 0; i < L; ++i) {
        if (!w.active[static_cast<std::size_t>(i)]) continue;
        const double prior = stats.prior(i);
        if (!(prior > 0.0)) {
            throw ConfigError("compute_gain: active class " + std::to_string(i) + " has zero prior");
        }
        for (Label k = 0; k <= L; ++k) {
            const double transition_term = stats.valid(i, k) ? mult.lambda(i, k) : 0.0;
            w.gain(i, k) = (1.0 + transition_term) / prior;
            w.tempered(i, k) = tau == 0.0 ? 1.0 : std::pow(w.gain(i, k), tau);
        }
    }
    return w;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
    Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
    p /= p.sum();
    return p;
}

namespace {

void check_indices(const GainWeights& weights, Eigen::Index size, Label y, Label u, const char* fn) {
    const int L = weights.num_classes();
    if (size != L) throw ConfigError(std::string(fn) + ": vector length != number of classes");
    if (y < 0 || y >= L) throw RangeError(std::string(fn) + ": class " + std::to_string(y) + " out of range");
    if (u < 0 || u > L) {
        throw RangeError(std::string(fn) + ": previous action " + std::to_string(u) + " out of range");
    }
}

}  // namespace

double weighted_ce_loss(const Eigen::Ref<const Eigen::VectorXd>& probs, Label y, Label u,
                        const GainWeights& weights) {
    check_indices(weights, probs.size(), y, u, "weighted_ce_loss");
    if (std::abs(probs.sum() - 1.0) > 1e-6) throw ConfigError("weighted_ce_loss: probabilities must sum to 1");
    return weights.weight(y, u) * -std::log(std::max(probs(y), kProbabilityFloor));
}

Eigen::VectorXd weighted_ce_grad_logits(const Eigen::Ref<const Eigen::VectorXd>& logits, Label y,
                                        Label u, const GainWeights& weights) {
    check_indices(weights, logits.size(), y, u, "weighted_ce_grad_logits");
    if (!logits.allFinite()) throw ConfigError("weighted_ce_grad_logits: non-finite logits");
    Eigen::VectorXd grad = softmax(logits);
    grad(y) -= 1.0;
    grad *= weights.weight(y, u);
    return grad;
}

double lagrangian_value(const ConfusionTensor& confusion, const TransitionStats& stats,
                        const MultiplierState& mult) {
    const int L = stats.num_classes;
    if (confusion.num_classes() != L || mult.num_classes() != L) {
        throw ConfigError("lagrangian_value: class count mismatch");
    }
    double objective = 0.0;
    double penalty = 0.0;
    for (Label i = 0; i < L; ++i) {
        const double prior = stats.prior(i);
        if (!(prior > 0.0)) continue;
        for (Label k = 0; k <= L; ++k) {
            const double hit = confusion.normalized(i, i, k);
            objective += hit / prior;
            if (stats.valid(i, k)) {
                const double t = stats.transition(i, k);
                penalty += mult.lambda(i, k) * (hit / t - mult.epsilon * mult.detached_mean_trans_acc) * (t / prior);
            }
        }
    }
    return objective + penalty;
}

MultiplierState update_multipliers(const MultiplierState& mult, const ConfusionTensor& confusion,
                                   const TransitionStats& stats) {
    const int L = stats.num_classes;
    if (confusion.num_classes() != L || mult.num_classes() != L) {
        throw ConfigError("update_multipliers: class count mismatch");
    }
    const LearningState state = learning_state(confusion, stats);
    MultiplierState next = mult;
    next.detached_mean_trans_acc = state.mean_trans_acc;
    const double target = next.epsilon * next.detached_mean_trans_acc;
    for (Label i = 0; i < L; ++i) {
        for (Label k = 0; k <= L; ++k) {
            const auto& acc = state.transition(i, k);
            if (!stats.valid(i, k) || !acc) {
                next.lambda(i, k) = stats.valid(i, k) ? mult.lambda(i, k) : 0.0;
                continue;
            }
            const double grad = (*acc - target) * (stats.transition(i, k) / stats.prior(i));
            next.lambda(i, k) = std::max(0.0, mult.lambda(i, k) - next.step_size * grad);
        }
    }
    return next;
}

MultiplierSummary summarize_multipliers(const MultiplierState& mult, const LearningState& state,
                                        const TransitionStats& stats) {
    MultiplierSummary s;
    const int L = stats.num_classes;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    std::size_t n = 0;
    const double target = mult.epsilon * state.mean_trans_acc;
    for (Label i = 0; i < L; ++i) {
        for (Label k = 0; k <= L; ++k) {
            if (!stats.valid(i, k)) continue;
            const double v = mult.lambda(i, k);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
            ++n;
            if (const auto& acc = state.transition(i, k); acc && *acc < target) ++s.violated;
        }
    }
    if (n) {
        s.min = lo;
        s.max = hi;
        s.mean = sum / static_cast<double>(n);
    }
    return s;
}

}  // namespace ltseg

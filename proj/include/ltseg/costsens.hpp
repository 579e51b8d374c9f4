#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ltseg/confusion.hpp"
#include "ltseg/seqdata.hpp"

namespace ltseg {

inline constexpr double kDefaultEpsilon = 0.9;
inline constexpr double kDefaultGamma = 0.01;
inline constexpr double kDefaultTau = 0.3;
inline constexpr double kProbabilityFloor = 1e-12;

// Lagrange multipliers of the per-transition accuracy constraints
// Tacc_{k->i} >= epsilon * mean Tacc, one per (class i, previous action k).
struct MultiplierState {
    Eigen::MatrixXd lambda;  // L x (L+1), >= 0, zero off the valid mask
    double step_size = kDefaultGamma;
    double epsilon = kDefaultEpsilon;
    // Mean transition accuracy of the last measured epoch, held constant
    // (never differentiated) inside the multiplier gradient.
    double detached_mean_trans_acc = 0.0;

    static MultiplierState zeros(int num_classes, double step_size = kDefaultGamma,
                                 double epsilon = kDefaultEpsilon);
    int num_classes() const { return static_cast<int>(lambda.rows()); }
    void validate() const;
};

// Per-(true class, true previous action) loss weights.
struct GainWeights {
    Eigen::MatrixXd gain;      // (1 + [T_ik > 0] lambda_ik) / prior_i
    Eigen::MatrixXd tempered;  // gain^tau; 0 for inactive classes
    double tau = 0.0;
    std::vector<bool> active;  // classes that take part in training

    int num_classes() const { return static_cast<int>(gain.rows()); }
    double weight(Label y, Label u) const { return tempered(y, u); }
};

// Unit weights: plain cross-entropy.
GainWeights unit_weights(int num_classes);

// active defaults to {i : prior_i > 0}. An active class with zero prior is a
// ConfigError.
GainWeights compute_gain(const TransitionStats& stats, const MultiplierState& mult, double tau,
                         std::optional<std::vector<bool>> active = std::nullopt);

// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

// tempered_{y,u} * -log(max(p_y, 1e-12)).
double weighted_ce_loss(const Eigen::Ref<const Eigen::VectorXd>& probs, Label y, Label u,
                        const GainWeights& weights);

// d loss / d logits = tempered_{y,u} * (softmax(logits) - onehot(y)).
Eigen::VectorXd weighted_ce_grad_logits(const Eigen::Ref<const Eigen::VectorXd>& logits, Label y,
                                        Label u, const GainWeights& weights);

// Lagrangian value with normalized confusion entries and the detached mean
// transition accuracy held in mult:
//   sum_{i,k} C_iik / pi_i
//     + sum_{(k->i) valid} lambda_ik (C_iik / T_ik - eps * Tbar) T_ik / pi_i
double lagrangian_value(const ConfusionTensor& confusion, const TransitionStats& stats,
                        const MultiplierState& mult);

// One projected gradient step on the multipliers. Refreshes the detached
// mean transition accuracy from this confusion tensor first.
MultiplierState update_multipliers(const MultiplierState& mult, const ConfusionTensor& confusion,
                                   const TransitionStats& stats);

struct MultiplierSummary {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
    std::size_t violated = 0;  // valid transitions with Tacc < eps * Tbar
};

// Lambda statistics over valid transitions.
MultiplierSummary summarize_multipliers(const MultiplierState& mult, const LearningState& state,
                                        const TransitionStats& stats);

}  // namespace ltseg

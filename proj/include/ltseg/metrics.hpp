#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltseg/seqdata.hpp"

namespace ltseg {

// Percent scores. Per-class entries are nullopt for classes without
// ground-truth support; those never enter an average.
struct FrameAccuracy {
    double global = 0.0;
    double per_class = 0.0;  // mean recall over supported classes
    std::vector<std::optional<double>> class_recall;
};

FrameAccuracy frame_accuracy(std::span<const Label> pred, std::span<const Label> truth, int num_classes);

// Unit-cost Levenshtein distance.
std::size_t levenshtein(std::span<const Label> a, std::span<const Label> b);

// 100 * (1 - levenshtein / max(|p|, |g|)) on segment label strings; 100 if
// both are empty.
double edit_score(std::span<const Label> pred_segments, std::span<const Label> truth_segments);

double segment_iou(const Segment& a, const Segment& b);

// Per-class true positive / false positive / false negative segment counts.
struct SegmentCounts {
    std::vector<std::uint64_t> tp, fp, fn;

    explicit SegmentCounts(int num_classes = 0);
    SegmentCounts& operator+=(const SegmentCounts& other);
    int num_classes() const { return static_cast<int>(tp.size()); }
};

// Predicted segments are visited in temporal order; each takes the
// highest-IoU unmatched ground-truth segment with its label (ties to the
// earliest) and is a true positive iff that IoU >= threshold.
SegmentCounts segmental_counts(const Segmentation& pred, const Segmentation& truth, double iou_threshold,
                               int num_classes);

struct F1Score {
    double global = 0.0;     // 2TP / (2TP + FP + FN), pooled over classes
    double per_class = 0.0;  // macro average over classes present in ground truth
    std::vector<std::optional<double>> class_f1;
};

F1Score f1_from_counts(const SegmentCounts& counts);
F1Score segmental_f1(const Segmentation& pred, const Segmentation& truth, double iou_threshold, int num_classes);

struct GroupScores {
    std::vector<Label> classes;
    bool empty = true;       // no scored class in this group
    double accuracy = 0.0;   // mean per-class recall over scored classes
    double f1_25 = 0.0;      // mean per-class F1@0.25 over scored classes
};

struct GroupReport {
    GroupScores head;
    GroupScores tail;
};

GroupReport group_report(const std::vector<std::optional<double>>& class_acc,
                         const std::vector<std::optional<double>>& class_f1_25, const HeadTailSplit& split);

struct F1AtThreshold {
    double threshold = 0.0;
    double global = 0.0;
    double per_class = 0.0;
};

struct MetricsReport {
    std::string name;
    int num_classes = 0;
    double global_acc = 0.0;
    double per_class_acc = 0.0;
    double edit = 0.0;
    std::vector<F1AtThreshold> f1;
    std::vector<std::optional<double>> class_acc;
    std::vector<std::optional<double>> class_f1_25;
    std::vector<std::uint64_t> support;  // ground-truth frames per class
    GroupReport groups;

    const F1AtThreshold& f1_at(double threshold) const;

    // Scores rounded to two decimals.
    nlohmann::ordered_json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
    // "method,metric,value" rows.
    std::string to_csv() const;
};

struct EvalOptions {
    std::vector<double> thresholds{0.10, 0.25, 0.50};
    // Pool TP/FP/FN over all sequences (default) or average per-sequence F1.
    bool pool_f1 = true;
};

// predictions[n] aligns with truth.sequences()[n]. Edit score is the mean
// over sequences.
MetricsReport evaluate(const std::string& name, const std::vector<std::vector<Label>>& predictions,
                       const Dataset& truth, const HeadTailSplit& split, const EvalOptions& options = {});

double round2(double v);

}  // namespace ltseg

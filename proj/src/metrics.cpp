#include "ltseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ltseg/error.hpp"

namespace ltseg {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

FrameAccuracy frame_accuracy(std::span<const Label> pred, std::span<const Label> truth, int num_classes) {
    if (pred.size() != truth.size()) {
        throw ConfigError("frame_accuracy: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(truth.size()) + " ground-truth frames");
    }
    std::vector<std::uint64_t> hits(static_cast<std::size_t>(num_classes), 0);
    std::vector<std::uint64_t> support(static_cast<std::size_t>(num_classes), 0);
    std::uint64_t correct = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const Label y = truth[t];
        if (y < 0 || y >= num_classes) throw RangeError("frame_accuracy: label out of range");
        ++support[static_cast<std::size_t>(y)];
        if (pred[t] == y) {
            ++hits[static_cast<std::size_t>(y)];
            ++correct;
        }
    }
    FrameAccuracy out;
    out.class_recall.assign(static_cast<std::size_t>(num_classes), std::nullopt);
    out.global = truth.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < support.size(); ++c) {
        if (!support[c]) continue;
        const double r = 100.0 * static_cast<double>(hits[c]) / static_cast<double>(support[c]);
        out.class_recall[c] = r;
        sum += r;
        ++n;
    }
    out.per_class = n ? sum / static_cast<double>(n) : 0.0;
    return out;
}

std::size_t levenshtein(std::span<const Label> a, std::span<const Label> b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double edit_score(std::span<const Label> pred_segments, std::span<const Label> truth_segments) {
    const std::size_t longest = std::max(pred_segments.size(), truth_segments.size());
    if (longest == 0) return 100.0;
    const double d = static_cast<double>(levenshtein(pred_segments, truth_segments));
    return 100.0 * (1.0 - d / static_cast<double>(longest));
}

double segment_iou(const Segment& a, const Segment& b) {
    const auto lo = std::max(a.start, b.start);
    const auto hi = std::min(a.end, b.end);
    const double inter = hi >= lo ? static_cast<double>(hi - lo + 1) : 0.0;
    const double uni = static_cast<double>(a.length() + b.length()) - inter;
    return inter / uni;
}

SegmentCounts::SegmentCounts(int num_classes)
    : tp(static_cast<std::size_t>(num_classes), 0),
      fp(static_cast<std::size_t>(num_classes), 0),
      fn(static_cast<std::size_t>(num_classes), 0) {}

SegmentCounts& SegmentCounts::operator+=(const SegmentCounts& other) {
    if (other.num_classes() != num_classes()) throw ConfigError("SegmentCounts: class count mismatch");
    for (std::size_t c = 0; c < tp.size(); ++c) {
        tp[c] += other.tp[c];
        fp[c] += other.fp[c];
        fn[c] += other.fn[c];
    }
    return *this;
}

SegmentCounts segmental_counts(const Segmentation& pred, const Segmentation& truth, double iou_threshold,
                               int num_classes) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw ConfigError("segmental_f1: IoU threshold must be in (0, 1)");
    }
    SegmentCounts counts(num_classes);
    std::vector<bool> used(truth.size(), false);
    for (const auto& p : pred) {
        if (p.label < 0 || p.label >= num_classes) throw RangeError("segmental_f1: predicted label out of range");
        double best = -1.0;
        std::size_t best_g = truth.size();
        for (std::size_t g = 0; g < truth.size(); ++g) {
            if (used[g] || truth[g].label != p.label) continue;
            const double iou = segment_iou(p, truth[g]);
            if (iou > best) {
                best = iou;
                best_g = g;
            }
        }
        const auto c = static_cast<std::size_t>(p.label);
        if (best_g < truth.size() && best >= iou_threshold) {
            used[best_g] = true;
            ++counts.tp[c];
        } else {
            ++counts.fp[c];
        }
    }
    for (std::size_t g = 0; g < truth.size(); ++g) {
        if (truth[g].label < 0 || truth[g].label >= num_classes) {
            throw RangeError("segmental_f1: ground-truth label out of range");
        }
        if (!used[g]) ++counts.fn[static_cast<std::size_t>(truth[g].label)];
    }
    return counts;
}

F1Score f1_from_counts(const SegmentCounts& counts) {
    auto f1 = [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
        const double denom = static_cast<double>(2 * tp + fp + fn);
        return denom > 0.0 ? 100.0 * 2.0 * static_cast<double>(tp) / denom : 0.0;
    };
    F1Score out;
    out.class_f1.assign(counts.tp.size(), std::nullopt);
    std::uint64_t tp = 0, fp = 0, fn = 0;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < counts.tp.size(); ++c) {
        tp += counts.tp[c];
        fp += counts.fp[c];
        fn += counts.fn[c];
        // Present in ground truth: matched or missed segments exist.
        if (counts.tp[c] + counts.fn[c] == 0) continue;
        const double v = f1(counts.tp[c], counts.fp[c], counts.fn[c]);
        out.class_f1[c] = v;
        sum += v;
        ++n;
    }
    out.global = f1(tp, fp, fn);
    out.per_class = n ? sum / static_cast<double>(n) : 0.0;
    return out;
}

F1Score segmental_f1(const Segmentation& pred, const Segmentation& truth, double iou_threshold, int num_classes) {
    return f1_from_counts(segmental_counts(pred, truth, iou_threshold, num_classes));
}

namespace {

GroupScores score_group(const std::vector<Label>& classes, const std::vector<std::optional<double>>& acc,
                        const std::vector<std::optional<double>>& f1) {
    GroupScores g;
    g.classes = classes;
    double acc_sum = 0.0, f1_sum = 0.0;
    std::size_t acc_n = 0, f1_n = 0;
    for (Label c : classes) {
        const auto i = static_cast<std::size_t>(c);
        if (i < acc.size() && acc[i]) {
            acc_sum += *acc[i];
            ++acc_n;
        }
        if (i < f1.size() && f1[i]) {
            f1_sum += *f1[i];
            ++f1_n;
        }
    }
    g.empty = acc_n == 0 && f1_n == 0;
    g.accuracy = acc_n ? acc_sum / static_cast<double>(acc_n) : 0.0;
    g.f1_25 = f1_n ? f1_sum / static_cast<double>(f1_n) : 0.0;
    return g;
}

}  // namespace

GroupReport group_report(const std::vector<std::optional<double>>& class_acc,
                         const std::vector<std::optional<double>>& class_f1_25, const HeadTailSplit& split) {
    const std::size_t L = std::max(class_acc.size(), class_f1_25.size());
    if (split.head.size() + split.tail.size() != L) {
        throw ConfigError("group_report: head/tail split covers " +
                          std::to_string(split.head.size() + split.tail.size()) + " of " + std::to_string(L) +
                          " classes");
    }
    return {score_group(split.head, class_acc, class_f1_25), score_group(split.tail, class_acc, class_f1_25)};
}

const F1AtThreshold& MetricsReport::f1_at(double threshold) const {
    for (const auto& e : f1) {
        if (std::abs(e.threshold - threshold) < 1e-9) return e;
    }
    throw ConfigError("MetricsReport: no F1 at threshold " + std::to_string(threshold));
}

namespace {

nlohmann::ordered_json optional_array(const std::vector<std::optional<double>>& v) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& x : v) {
        if (x) arr.push_back(round2(*x));
        else arr.push_back(nullptr);
    }
    return arr;
}

std::vector<std::optional<double>> optional_from_json(const nlohmann::json& arr) {
    std::vector<std::optional<double>> v;
    for (const auto& x : arr) {
        if (x.is_null()) v.emplace_back(std::nullopt);
        else v.emplace_back(x.get<double>());
    }
    return v;
}

nlohmann::ordered_json group_json(const GroupScores& g) {
    nlohmann::ordered_json j;
    j["classes"] = g.classes;
    j["empty"] = g.empty;
    j["acc"] = round2(g.accuracy);
    j["f1_25"] = round2(g.f1_25);
    return j;
}

GroupScores group_from_json(const nlohmann::json& j) {
    GroupScores g;
    g.classes = j.at("classes").get<std::vector<Label>>();
    g.empty = j.at("empty").get<bool>();
    g.accuracy = j.at("acc").get<double>();
    g.f1_25 = j.at("f1_25").get<double>();
    return g;
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["num_classes"] = num_classes;
    j["global_acc"] = round2(global_acc);
    j["per_class_acc"] = round2(per_class_acc);
    j["edit"] = round2(edit);
    j["f1"] = nlohmann::ordered_json::array();
    for (const auto& e : f1) {
        j["f1"].push_back({{"threshold", e.threshold}, {"global", round2(e.global)}, {"per_class", round2(e.per_class)}});
    }
    j["class_acc"] = optional_array(class_acc);
    j["class_f1_25"] = optional_array(class_f1_25);
    j["support"] = support;
    j["groups"] = {{"head", group_json(groups.head)}, {"tail", group_json(groups.tail)}};
    return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport r;
    try {
        r.name = j.at("name").get<std::string>();
        r.num_classes = j.at("num_classes").get<int>();
        r.global_acc = j.at("global_acc").get<double>();
        r.per_class_acc = j.at("per_class_acc").get<double>();
        r.edit = j.at("edit").get<double>();
        for (const auto& e : j.at("f1")) {
            r.f1.push_back({e.at("threshold").get<double>(), e.at("global").get<double>(), e.at("per_class").get<double>()});
        }
        r.class_acc = optional_from_json(j.at("class_acc"));
        r.class_f1_25 = optional_from_json(j.at("class_f1_25"));
        r.support = j.at("support").get<std::vector<std::uint64_t>>();
        r.groups.head = group_from_json(j.at("groups").at("head"));
        r.groups.tail = group_from_json(j.at("groups").at("tail"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("metrics report: ") + e.what());
    }
    return r;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream ss;
    ss << "method,metric,value\n";
    auto row = [&](const std::string& metric, double v) { ss << name << ',' << metric << ',' << fmt2(v) << '\n'; };
    row("global_acc", global_acc);
    row("per_class_acc", per_class_acc);
    row("edit", edit);
    for (const auto& e : f1) {
        const auto pct = std::to_string(static_cast<int>(std::lround(e.threshold * 100)));
        row("global_f1@" + pct, e.global);
        row("per_class_f1@" + pct, e.per_class);
    }
    if (!groups.head.empty) {
        row("head_acc", groups.head.accuracy);
        row("head_f1@25", groups.head.f1_25);
    }
    if (!groups.tail.empty) {
        row("tail_acc", groups.tail.accuracy);
        row("tail_f1@25", groups.tail.f1_25);
    }
    return ss.str();
}

MetricsReport evaluate(const std::string& name, const std::vector<std::vector<Label>>& predictions,
                       const Dataset& truth, const HeadTailSplit& split, const EvalOptions& options) {
    const auto& seqs = truth.sequences();
    if (predictions.size() != seqs.size()) {
        throw ConfigError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(seqs.size()) + " sequences");
    }
    const int L = truth.num_classes();
    MetricsReport r;
    r.name = name;
    r.num_classes = L;
    r.support = truth.class_frame_counts();

    std::vector<Label> all_pred, all_truth;
    double edit_sum = 0.0;
    std::vector<SegmentCounts> pooled(options.thresholds.size(), SegmentCounts(L));
    std::vector<F1AtThreshold> averaged(options.thresholds.size());
    for (std::size_t n = 0; n < seqs.size(); ++n) {
        const auto& p = predictions[n];
        const auto& y = seqs[n].frame_labels();
        if (p.size() != y.size()) {
            throw ConfigError("evaluate: sequence '" + seqs[n].id() + "' has " + std::to_string(y.size()) +
                              " frames but " + std::to_string(p.size()) + " predictions");
        }
        all_pred.insert(all_pred.end(), p.begin(), p.end());
        all_truth.insert(all_truth.end(), y.begin(), y.end());
        const Segmentation ps = segmentation_from_frames(p);
        edit_sum += edit_score(segment_labels(ps), segment_labels(seqs[n].segmentation()));
        for (std::size_t k = 0; k < options.thresholds.size(); ++k) {
            const auto counts = segmental_counts(ps, seqs[n].segmentation(), options.thresholds[k], L);
            pooled[k] += counts;
            const auto f = f1_from_counts(counts);
            averaged[k].global += f.global;
            averaged[k].per_class += f.per_class;
        }
    }
    const auto acc = frame_accuracy(all_pred, all_truth, L);
    r.global_acc = acc.global;
    r.per_class_acc = acc.per_class;
    r.class_acc = acc.class_recall;
    r.edit = seqs.empty() ? 0.0 : edit_sum / static_cast<double>(seqs.size());
    for (std::size_t k = 0; k < options.thresholds.size(); ++k) {
        const auto f = f1_from_counts(pooled[k]);
        F1AtThreshold e{options.thresholds[k], f.global, f.per_class};
        if (!options.pool_f1 && !seqs.empty()) {
            e.global = averaged[k].global / static_cast<double>(seqs.size());
            e.per_class = averaged[k].per_class / static_cast<double>(seqs.size());
        }
        r.f1.push_back(e);
        if (std::abs(options.thresholds[k] - 0.25) < 1e-9) r.class_f1_25 = f.class_f1;
    }
    if (r.class_f1_25.empty()) {
        r.class_f1_25 = f1_from_counts([&] {
            SegmentCounts c(L);
            for (std::size_t n = 0; n < seqs.size(); ++n) {
                c += segmental_counts(segmentation_from_frames(predictions[n]), seqs[n].segmentation(), 0.25, L);
            }
            return c;
        }()).class_f1;
    }
    r.groups = group_report(r.class_acc, r.class_f1_25, split);
    return r;
}

}  // namespace ltseg

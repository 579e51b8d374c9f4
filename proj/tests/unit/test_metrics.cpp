#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ltseg/error.hpp"
#include "ltseg/metrics.hpp"
#include "support.hpp"

using namespace ltseg;
using namespace ltseg::testing;

namespace {

std::size_t levenshtein_oracle(const std::vector<Label>& a, const std::vector<Label>& b) {
    // Full-matrix DP.
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1] ? 1u : 0u)});
    return d[a.size()][b.size()];
}

}  // namespace

TEST_CASE("frame accuracy") {
    const std::vector<Label> y{0, 1, 2, 1};
    auto acc = frame_accuracy(y, y, 3);
    CHECK(acc.global == 100.0);
    CHECK(acc.per_class == 100.0);

    std::vector<Label> truth(100, 0);
    std::fill(truth.begin() + 90, truth.end(), 1);
    const std::vector<Label> zeros(100, 0);
    acc = frame_accuracy(zeros, truth, 2);
    CHECK(acc.global == 90.0);
    CHECK(acc.per_class == 50.0);

    acc = frame_accuracy(zeros, truth, 3);
    CHECK(!acc.class_recall[2].has_value());
    CHECK(acc.per_class == 50.0);

    CHECK_THROWS_AS(frame_accuracy(std::vector<Label>{0}, truth, 2), ConfigError);
}

TEST_CASE("frame accuracy matches a per-frame tally") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const int L = uniform_int(rng, 2, 6);
        const auto truth = random_labels(rng, L, 20);
        std::vector<Label> pred(truth.size());
        for (auto& p : pred) p = uniform_int(rng, 0, L - 1);
        const auto acc = frame_accuracy(pred, truth, L);
        std::vector<int> hit(static_cast<std::size_t>(L)), n(static_cast<std::size_t>(L));
        int correct = 0;
        for (std::size_t t = 0; t < truth.size(); ++t) {
            ++n[static_cast<std::size_t>(truth[t])];
            if (pred[t] == truth[t]) {
                ++hit[static_cast<std::size_t>(truth[t])];
                ++correct;
            }
        }
        CHECK(acc.global == doctest::Approx(100.0 * correct / static_cast<double>(truth.size())));
        double sum = 0.0;
        int classes = 0;
        for (int c = 0; c < L; ++c)
            if (n[static_cast<std::size_t>(c)]) {
                sum += 100.0 * hit[static_cast<std::size_t>(c)] / n[static_cast<std::size_t>(c)];
                ++classes;
            }
        CHECK(acc.per_class == doctest::Approx(sum / classes));
        CHECK(acc.per_class <= 100.0);
    }
}

TEST_CASE("balanced symmetric predictions give equal global and per-class accuracy") {
    // Each class has 4 frames and the same number of hits.
    const std::vector<Label> truth{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
    const std::vector<Label> pred{0, 0, 1, 2, 1, 1, 2, 0, 2, 2, 0, 1};
    const auto acc = frame_accuracy(pred, truth, 3);
    CHECK(acc.global == doctest::Approx(acc.per_class));
}

TEST_CASE("edit score") {
    const std::vector<Label> abc{0, 1, 0};
    CHECK(edit_score(abc, abc) == 100.0);
    CHECK(edit_score(abc, std::vector<Label>{0, 1}) == doctest::Approx(100.0 * (1.0 - 1.0 / 3.0)));
    CHECK(edit_score(std::vector<Label>{0, 1, 2}, std::vector<Label>{3, 4, 5}) == 0.0);
    CHECK(edit_score(std::vector<Label>{}, std::vector<Label>{}) == 100.0);
    CHECK(edit_score(std::vector<Label>{}, std::vector<Label>{1}) == 0.0);

    Rng rng(22);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Label> a(static_cast<std::size_t>(uniform_int(rng, 0, 10))), b(static_cast<std::size_t>(uniform_int(rng, 0, 10)));
        for (auto& x : a) x = uniform_int(rng, 0, 3);
        for (auto& x : b) x = uniform_int(rng, 0, 3);
        CHECK(levenshtein(a, b) == levenshtein_oracle(a, b));
        CHECK(edit_score(a, b) == edit_score(b, a));
    }
}

TEST_CASE("edit score ignores durations") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_labels(rng, 4, 30);
        const auto g = random_labels(rng, 4, 30);
        auto stretch = [&](const std::vector<Label>& y) {
            std::vector<Label> out;
            for (const auto& s : segmentation_from_frames(y))
                out.insert(out.end(), static_cast<std::size_t>(uniform_int(rng, 1, 9)), s.label);
            return out;
        };
        const auto score = [](const std::vector<Label>& a, const std::vector<Label>& b) {
            return edit_score(segment_labels(segmentation_from_frames(a)), segment_labels(segmentation_from_frames(b)));
        };
        CHECK(score(p, g) == score(stretch(p), stretch(g)));
    }
}

TEST_CASE("segmental F1 on a half-covered segment") {
    const Segmentation truth{{0, 99, 0}};
    const Segmentation pred{{0, 49, 0}, {50, 99, 1}};
    CHECK(segment_iou(pred[0], truth[0]) == 0.5);
    const Segmentation half{{0, 49, 0}};
    for (double th : {0.10, 0.25, 0.50}) {
        // only the class-0 segment is scored when the prediction is a single segment
        const auto counts = segmental_counts(half, truth, th, 1);
        CHECK(counts.tp[0] == 1);
        CHECK(segmental_f1(half, truth, th, 1).per_class == 100.0);
    }
    CHECK(segmental_f1(half, truth, 0.6, 1).global == 0.0);

    const Segmentation same{{0, 3, 0}, {4, 9, 1}};
    for (double th : {0.10, 0.25, 0.50}) {
        const auto f = segmental_f1(same, same, th, 2);
        CHECK(f.global == 100.0);
        CHECK(f.per_class == 100.0);
    }
    CHECK_THROWS_AS(segmental_f1(same, same, 1.0, 2), ConfigError);
    CHECK_THROWS_AS(segmental_f1(same, same, 0.0, 2), ConfigError);
}

TEST_CASE("segmental F1 is monotone in the threshold") {
    Rng rng(24);
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = random_labels(rng, 3, 40);
        std::vector<Label> p = t;
        for (auto& x : p)
            if (uniform_real(rng, 0, 1) < 0.2) x = uniform_int(rng, 0, 2);
        const auto ts = segmentation_from_frames(t), ps = segmentation_from_frames(p);
        double prev_g = 101.0, prev_c = 101.0;
        for (double th : {0.05, 0.1, 0.25, 0.5, 0.75, 0.9}) {
            const auto f = segmental_f1(ps, ts, th, 3);
            CHECK(f.global <= prev_g);
            CHECK(f.per_class <= prev_c);
            prev_g = f.global;
            prev_c = f.per_class;
        }
    }
}

TEST_CASE("group report") {
    const std::vector<std::optional<double>> acc{90.0, 80.0, 40.0, 20.0};
    const std::vector<std::optional<double>> f1{70.0, 60.0, 30.0, std::nullopt};
    const auto split = head_tail_split(std::vector<std::uint64_t>{100, 60, 10, 5}, 50.0);
    const auto r = group_report(acc, f1, split);
    CHECK(r.head.accuracy == 85.0);
    CHECK(r.tail.accuracy == 30.0);
    CHECK(r.head.f1_25 == 65.0);
    CHECK(r.tail.f1_25 == 30.0);
    CHECK(!r.tail.empty);

    const auto all_head = head_tail_split(std::vector<std::uint64_t>{100, 60, 70, 80}, 50.0);
    const auto r2 = group_report(acc, f1, all_head);
    CHECK(r2.tail.empty);
    CHECK(r2.tail.classes.empty());

    HeadTailSplit partial{{0}, {1}};
    CHECK_THROWS_AS(group_report(acc, f1, partial), ConfigError);
}

TEST_CASE("evaluate on perfect predictions") {
    SynthConfig c;
    c.num_sequences = 10;
    const auto data = generate_synthetic(c);
    std::vector<std::vector<Label>> preds;
    for (const auto& s : data.sequences()) preds.push_back(s.frame_labels());
    const auto split = head_tail_split(data.class_frame_counts(), 200.0);
    const auto r = evaluate("perfect", preds, data, split);
    CHECK(r.global_acc == 100.0);
    CHECK(r.per_class_acc == 100.0);
    CHECK(r.edit == 100.0);
    for (const auto& f : r.f1) {
        CHECK(f.global == 100.0);
        CHECK(f.per_class == 100.0);
    }
    if (!r.groups.head.empty) CHECK(r.groups.head.accuracy == 100.0);
    if (!r.groups.tail.empty) CHECK(r.groups.tail.accuracy == 100.0);

    const auto back = MetricsReport::from_json(r.to_json());
    CHECK(back.to_json() == r.to_json());
    CHECK(r.to_csv().rfind("method,metric,value\n", 0) == 0);
}

#include <doctest.h>

#include <cmath>
#include <map>

#include "ltseg/error.hpp"
#include "ltseg/seqdata.hpp"
#include "support.hpp"

using namespace ltseg;
using namespace ltseg::testing;

TEST_CASE("run-length encoding") {
    const std::vector<Label> y{0, 0, 1, 1, 1, 0};
    const Segmentation expected{{0, 1, 0}, {2, 4, 1}, {5, 5, 0}};
    CHECK(segmentation_from_frames(y) == expected);

    const std::vector<Label> single{3};
    CHECK(segmentation_from_frames(single) == Segmentation{{0, 0, 3}});

    CHECK_THROWS_AS(segmentation_from_frames(std::vector<Label>{}), EmptySequenceError);
}

TEST_CASE("segmentation round trip on random label arrays") {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto y = random_labels(rng, 5, 60);
        const auto segs = segmentation_from_frames(y);
        CHECK(expand_segmentation(segs) == y);

        REQUIRE(!segs.empty());
        CHECK(segs.front().start == 0);
        CHECK(segs.back().end == y.size() - 1);
        for (std::size_t n = 1; n < segs.size(); ++n) {
            CHECK(segs[n].start == segs[n - 1].end + 1);
            CHECK(segs[n].label != segs[n - 1].label);
        }
    }
}

TEST_CASE("sequence derives previous actions per segment") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto y = random_labels(rng, 4, 40);
        const auto seq = sequence_of(y, 4);
        const auto& segs = seq.segmentation();
        for (std::size_t n = 0; n < segs.size(); ++n) {
            const Label expected = n == 0 ? 4 : segs[n - 1].label;
            for (std::size_t t = segs[n].start; t <= segs[n].end; ++t) {
                CHECK(seq.prev_action()[t] == expected);
                CHECK(seq.frame_labels()[t] == segs[n].label);
            }
        }
    }
}

TEST_CASE("sequence validation") {
    CHECK_THROWS_AS(sequence_of({0, 2}, 2), RangeError);
    CHECK_THROWS_AS(sequence_of({0, -1}, 2), RangeError);
    CHECK_THROWS_AS(sequence_of({}, 2), EmptySequenceError);

    FeatureMatrix short_features = FeatureMatrix::Zero(2, 2);
    CHECK_THROWS_AS(LabeledSequence("x", short_features, {0, 0, 1}, 2), ConfigError);

    FeatureMatrix bad = FeatureMatrix::Zero(2, 2);
    bad(1, 1) = std::nanf("");
    CHECK_THROWS_AS(LabeledSequence("x", bad, {0, 1}, 2), ConfigError);
}

TEST_CASE("dataset counts and absent classes") {
    const auto data = dataset_of({{0, 0, 1}, {1, 1, 1, 0}}, 3);
    CHECK(data.class_frame_counts() == std::vector<std::uint64_t>{3, 4, 0});
    CHECK(data.total_frames() == 7);
    CHECK(data.absent_classes() == std::vector<Label>{2});
    CHECK(data.class_names()[1] == "action_01");
}

TEST_CASE("transition stats of [A,A,B]") {
    const auto stats = compute_transition_stats(dataset_of({{0, 0, 1}}, 2));
    CHECK(stats.counts(0, 2) == 2);
    CHECK(stats.counts(1, 0) == 1);
    CHECK(stats.transition(0, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(stats.transition(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(stats.transition.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats.transition(0, 0) == 0.0);
    CHECK(stats.transition(0, 1) == 0.0);
    CHECK(stats.transition(1, 1) == 0.0);
    CHECK(stats.transition(1, 2) == 0.0);
    CHECK(stats.prior(0) == doctest::Approx(2.0 / 3.0));
    CHECK(stats.prior(1) == doctest::Approx(1.0 / 3.0));
    CHECK(stats.num_valid() == 2);
}

TEST_CASE("single-segment sequences of one class") {
    const auto stats = compute_transition_stats(dataset_of({{2, 2}, {2}, {2, 2, 2}}, 3));
    CHECK(stats.transition(2, 3) == 1.0);
    CHECK(stats.prior(2) == 1.0);
    CHECK(stats.num_valid() == 1);
}

TEST_CASE("transition stats invariants on random datasets") {
    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        const int L = uniform_int(rng, 2, 6);
        const auto data = random_dataset(rng, L, 1, 4, 50);
        const auto stats = compute_transition_stats(data);
        CHECK(std::abs(stats.transition.sum() - 1.0) < 1e-9);
        for (int i = 0; i < L; ++i) {
            CHECK(std::abs(stats.prior(i) - stats.transition.row(i).sum()) < 1e-12);
            CHECK(stats.transition(i, i) == 0.0);
            for (int k = 0; k <= L; ++k) CHECK(stats.valid(i, k) == (stats.transition(i, k) > 0.0));
        }
    }
}

TEST_CASE("zero-noise generator recovers the emitter means") {
    SynthConfig c;
    c.num_classes = 2;
    c.feature_dim = 3;
    c.num_sequences = 20;
    c.class_skew = 0.0;
    c.noise_scale = 0.0;
    c.emitter_means = {{1.0, -2.0, 0.5}, {-1.0, 4.0, 2.25}};
    c.rng_seed = 7;
    const auto data = generate_synthetic(c);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(3, 2);
    for (const auto& seq : data.sequences())
        for (std::size_t t = 0; t < seq.num_frames(); ++t)
            sums.col(seq.frame_labels()[t]) += seq.features().col(static_cast<Eigen::Index>(t)).cast<double>();
    for (int i = 0; i < 2; ++i) {
        REQUIRE(data.class_frame_counts()[static_cast<std::size_t>(i)] > 0);
        const Eigen::VectorXd mean = sums.col(i) / static_cast<double>(data.class_frame_counts()[static_cast<std::size_t>(i)]);
        for (int d = 0; d < 3; ++d) CHECK(mean(d) == c.emitter_means[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
    }
}

TEST_CASE("generator skew produces a long tail") {
    SynthConfig c;
    c.num_classes = 10;
    c.class_skew = 1.5;
    c.rng_seed = 1;
    const auto counts = generate_synthetic(c).class_frame_counts();
    const auto head = *std::max_element(counts.begin(), counts.end());
    const auto tail = *std::min_element(counts.begin(), counts.end());
    REQUIRE(tail > 0);
    CHECK(static_cast<double>(head) / static_cast<double>(tail) >= 10.0);
}

TEST_CASE("generator is deterministic in its seed") {
    SynthConfig c;
    c.num_sequences = 30;
    c.rng_seed = 99;
    const auto a = generate_synthetic(c);
    const auto b = generate_synthetic(c);
    CHECK(a == b);
    c.rng_seed = 100;
    CHECK(!(generate_synthetic(c) == a));
}

TEST_CASE("generated sequences respect the data invariants") {
    SynthConfig c;
    c.num_sequences = 40;
    c.duration_mean = 1.5;
    c.duration_spread = 2.0;
    c.rng_seed = 3;
    const auto data = generate_synthetic(c);
    std::uint64_t total = 0;
    for (const auto& seq : data.sequences()) {
        CHECK(expand_segmentation(seq.segmentation()) == seq.frame_labels());
        CHECK(seq.feature_dim() == c.feature_dim);
        for (const auto& s : seq.segmentation()) CHECK(s.length() >= 1);
        total += seq.num_frames();
    }
    CHECK(total == data.total_frames());
}

TEST_CASE("synthetic config validation") {
    SynthConfig c;
    c.num_classes = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SynthConfig{};
    c.noise_scale = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SynthConfig{};
    c.emitter_means = {{1.0}};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("head/tail split") {
    const std::vector<std::uint64_t> counts{60000, 40000};
    auto split = head_tail_split(counts, 5e4);
    CHECK(split.head == std::vector<Label>{0});
    CHECK(split.tail == std::vector<Label>{1});

    split = head_tail_split(counts, 1e6);
    CHECK(split.head.empty());
    CHECK(split.tail.size() == 2);

    const std::vector<std::uint64_t> equal{5, 5, 5};
    split = head_tail_split(equal, 5.0);
    CHECK(split.head.size() == 3);
    CHECK(split.tail.empty());

    CHECK_THROWS_AS(head_tail_split(equal, 0.0), ConfigError);
}

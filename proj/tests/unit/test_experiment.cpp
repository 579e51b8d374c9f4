#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "ltseg/error.hpp"
#include "ltseg/experiment.hpp"
#include "ltseg/io.hpp"
#include "support.hpp"

using namespace ltseg;
using namespace ltseg::testing;

namespace {

ExperimentConfig small_config() {
    auto c = ExperimentConfig::defaults();
    c.synthetic->num_classes = 6;
    c.synthetic->feature_dim = 4;
    c.synthetic->num_sequences = 16;
    c.test_sequences = 6;
    c.train.epochs = 3;
    c.set_seed(5);
    return c;
}

std::vector<std::string> files_under(const fs::path& root) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
    auto c = small_config();
    c.decode = DecodeMode::sncm;
    c.head_tail_threshold = 123.0;
    c.eval.thresholds = {0.3};
    const auto j = c.to_json();
    const auto back = ExperimentConfig::from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.to_json() == j);
    CHECK(back.hash() == c.hash());
    CHECK(back.hash().size() == 16);

    auto other = c;
    other.train.tau = 0.5;
    CHECK(other.hash() != c.hash());

    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"seed": 1, "bogus": 2})")), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"train": {"lr": 2}})")), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"decode": "viterbi"})")), ConfigError);

    auto bad = small_config();
    bad.eval.thresholds = {1.5};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config files resolve manifests relative to themselves") {
    TempDir dir("cfg");
    const auto data = generate_synthetic(*small_config().synthetic);
    io::save_dataset(data, dir.path() / "d");
    io::write_text(dir.path() / "c.json", R"({"dataset": {"train_manifest": "d/manifest.json"}, "train": {"epochs": 1}})");
    const auto c = load_experiment_config(dir.path() / "c.json");
    REQUIRE(c.train_manifest.has_value());
    CHECK(fs::equivalent(*c.train_manifest, dir.path() / "d" / "manifest.json"));
    CHECK(!c.synthetic.has_value());
    const auto splits = resolve_datasets(c);
    CHECK(splits.train == data);
    CHECK(!splits.test.has_value());

    io::write_text(dir.path() / "broken.json", "{\"seed\": ");
    CHECK_THROWS_AS(load_experiment_config(dir.path() / "broken.json"), ParseError);
}

TEST_CASE("gen writes the datasets and a sorted class-count table") {
    TempDir dir("gen");
    auto c = ExperimentConfig::defaults();
    c.synthetic->num_classes = 10;
    c.synthetic->class_skew = 1.5;
    c.synthetic->num_sequences = 50;
    std::ostringstream log;
    cmd_gen(c, dir.path(), log);
    const auto train = io::load_dataset(dir.path() / "train" / "manifest.json");
    CHECK(train.sequences().size() == 50);
    CHECK(io::load_dataset(dir.path() / "test" / "manifest.json").sequences().size() == 100);

    std::istringstream csv(io::read_text(dir.path() / "class_counts.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "rank,class_id,class_name,frames");
    std::uint64_t prev = UINT64_MAX;
    int rows = 0;
    while (std::getline(csv, line)) {
        const auto frames = std::stoull(line.substr(line.rfind(',') + 1));
        CHECK(frames <= prev);
        prev = frames;
        ++rows;
    }
    CHECK(rows == 10);
}

TEST_CASE("commands are byte-reproducible") {
    TempDir a("det"), b("det");
    const auto c = small_config();
    for (const auto* dir : {&a, &b}) {
        std::ostringstream log;
        cmd_gen(c, dir->path() / "gen", log);
        cmd_train(c, dir->path() / "train", log);
        auto e = c;
        e.decode = DecodeMode::sncm;
        cmd_eval(e, dir->path() / "train" / "checkpoint.bin", dir->path() / "eval", log);
    }
    const auto files = files_under(a.path());
    CHECK(files == files_under(b.path()));
    CHECK(std::find(files.begin(), files.end(), "train/telemetry.jsonl") != files.end());
    CHECK(std::find(files.begin(), files.end(), "eval/report_ncm.json") != files.end());
    for (const auto& f : files) {
        INFO(f);
        CHECK(io::read_text(a.path() / f) == io::read_text(b.path() / f));
    }
}

TEST_CASE("train telemetry follows the loss mode") {
    TempDir dir("tel");
    auto c = small_config();
    c.train.loss_mode = LossMode::plain_ce;
    std::ostringstream log;
    cmd_train(c, dir.path() / "plain", log);
    const auto plain = io::read_text(dir.path() / "plain" / "telemetry.jsonl");
    CHECK(plain.find("lambda") == std::string::npos);
    CHECK(plain.find("lagrangian") == std::string::npos);

    c.train.loss_mode = LossMode::cost_sensitive;
    c.train.epochs = 0;
    const auto r = cmd_train(c, dir.path() / "cs0", log);
    CHECK(r.multipliers.lambda.isZero(0.0));
    const auto ckpt = load_checkpoint(dir.path() / "cs0" / "checkpoint.bin");
    CHECK(ckpt.params == ClassifierParams::zeros(6, 4, c.train.context_radius));

    c.train.epochs = 2;
    cmd_train(c, dir.path() / "cs", log);
    std::istringstream lines(io::read_text(dir.path() / "cs" / "telemetry.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* key : {"epoch", "loss", "lagrangian", "mean_trans_acc", "lambda_min", "lambda_mean",
                                "lambda_max", "violated"})
            CHECK(j.contains(key));
        ++n;
    }
    CHECK(n == 2);
}

TEST_CASE("eval rejects a mismatched checkpoint") {
    TempDir dir("ev");
    auto c = small_config();
    save_checkpoint(dir.path() / "c.bin", ClassifierParams::zeros(3, 4, 1), 0);
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_eval(c, dir.path() / "c.bin", dir.path() / "out", log), ConfigError);
}

TEST_CASE("separable setup scores near 100") {
    auto c = ExperimentConfig::defaults();
    c.synthetic->num_classes = 4;
    c.synthetic->class_skew = 0.5;
    c.synthetic->num_sequences = 30;
    c.synthetic->noise_scale = 0.0;
    c.synthetic->mean_scale = 3.0;
    c.test_sequences = 10;
    c.train.epochs = 30;
    c.train.loss_mode = LossMode::plain_ce;
    c.set_seed(2);
    const auto r = run_experiment(c, resolve_datasets(c)).report;
    CHECK(r.global_acc >= 99.0);
    CHECK(r.per_class_acc >= 99.0);
    CHECK(r.edit >= 99.0);
    CHECK(r.f1_at(0.5).per_class >= 99.0);
}

TEST_CASE("under-learned tail classes pull per-class accuracy below global") {
    auto c = ExperimentConfig::defaults();
    c.synthetic->num_classes = 6;
    c.synthetic->num_sequences = 30;
    c.synthetic->class_skew = 2.0;
    c.synthetic->noise_scale = 1.0;
    c.test_sequences = 0;
    c.train.loss_mode = LossMode::plain_ce;
    c.train.epochs = 2;
    c.train.learning_rate = 0.01;
    c.set_seed(3);
    const auto r = run_experiment(c, resolve_datasets(c)).report;
    CHECK(r.global_acc > r.per_class_acc);
}

TEST_CASE("comparison table") {
    MetricsReport base;
    base.name = "a";
    base.num_classes = 2;
    base.per_class_acc = 50.0;
    base.f1 = {{0.10, 40.0, 30.0}, {0.25, 35.0, 25.0}, {0.50, 20.0, 10.0}};
    MetricsReport better = base;
    better.name = "b";
    better.per_class_acc = 55.5;
    better.f1[1].per_class = 27.0;
    MetricsReport third = base;
    third.name = "c";

    auto t = compare_reports({base});
    CHECK(t.methods == std::vector<std::string>{"a"});
    CHECK(t.values[0] == std::vector<double>{30.0, 25.0, 10.0, 50.0, 35.0});
    for (double d : t.deltas[0]) CHECK(d == 0.0);

    t = compare_reports({base, better, third});
    CHECK(t.methods == std::vector<std::string>{"a", "b", "c"});
    CHECK(t.deltas[1][1] == 2.0);
    CHECK(t.deltas[1][3] == 5.5);
    CHECK(t.deltas[2][3] == 0.0);

    MetricsReport wrong = base;
    wrong.num_classes = 3;
    CHECK_THROWS_AS(compare_reports({base, wrong}), ConfigError);
    CHECK_THROWS_AS(compare_reports({}), ConfigError);
}

TEST_CASE("default run directory") {
    const auto c = small_config();
    const auto dir = default_run_dir(c, "runs");
    CHECK(dir.parent_path() == fs::path("runs"));
    CHECK(dir.filename().string().rfind(c.hash() + "-", 0) == 0);
}

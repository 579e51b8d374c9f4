#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltseg/error.hpp"
#include "ltseg/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string decode;
    std::string loss;
    std::optional<double> tau, epsilon, gamma;
    std::optional<int> epochs;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Experiment config (JSON); defaults apply when omitted");
    cmd->add_option("--seed", f.seed, "Seed for generation and training");
    cmd->add_option("--out", f.out, "Output directory (default: runs/<config hash>-<timestamp>)");
    cmd->add_option("--decode", f.decode, "Decoder")->check(CLI::IsMember({"argmax", "ncm", "sncm"}));
    cmd->add_option("--loss", f.loss, "Loss mode")->check(CLI::IsMember({"plain_ce", "inverse_prior", "cost_sensitive"}));
    cmd->add_option("--tau", f.tau, "Gain tempering exponent");
    cmd->add_option("--epsilon", f.epsilon, "Transition-constraint tolerance");
    cmd->add_option("--gamma", f.gamma, "Multiplier step size");
    cmd->add_option("--epochs", f.epochs, "Training epochs");
}

ltseg::ExperimentConfig effective_config(const CommonFlags& f) {
    ltseg::ExperimentConfig c =
        f.config.empty() ? ltseg::ExperimentConfig::defaults() : ltseg::load_experiment_config(f.config);
    if (f.seed) c.set_seed(*f.seed);
    if (!f.decode.empty()) c.decode = ltseg::parse_decode_mode(f.decode);
    if (!f.loss.empty()) c.train.loss_mode = ltseg::parse_loss_mode(f.loss);
    if (f.tau) c.train.tau = *f.tau;
    if (f.epsilon) c.train.epsilon = *f.epsilon;
    if (f.gamma) c.train.gamma = *f.gamma;
    if (f.epochs) c.train.epochs = *f.epochs;
    c.validate();
    return c;
}

std::filesystem::path out_dir(const CommonFlags& f, const ltseg::ExperimentConfig& c) {
    return f.out.empty() ? ltseg::default_run_dir(c) : std::filesystem::path(f.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cost-sensitive training and evaluation for long-tailed temporal segmentation"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic long-tailed dataset");
    add_common(gen, gen_flags);

    auto* trn = app.add_subcommand("train", "Train a frame classifier");
    add_common(trn, train_flags);

    auto* evl = app.add_subcommand("eval", "Decode the evaluation split and write metric reports");
    add_common(evl, eval_flags);
    std::string checkpoint;
    evl->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

    auto* rep = app.add_subcommand("report", "Compare metric reports against the first one");
    std::vector<std::string> report_files;
    std::string report_out = ".";
    rep->add_option("reports", report_files, "Report JSON files (first is the baseline)")->required();
    rep->add_option("--out", report_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto c = effective_config(gen_flags);
            const auto out = out_dir(gen_flags, c);
            ltseg::cmd_gen(c, out, std::cout);
            std::cerr << "wrote " << out.string() << '\n';
        } else if (trn->parsed()) {
            const auto c = effective_config(train_flags);
            const auto out = out_dir(train_flags, c);
            ltseg::cmd_train(c, out, std::cout);
            std::cerr << "wrote " << out.string() << '\n';
        } else if (evl->parsed()) {
            const auto c = effective_config(eval_flags);
            const auto out = out_dir(eval_flags, c);
            ltseg::cmd_eval(c, checkpoint, out, std::cout);
            std::cerr << "wrote " << out.string() << '\n';
        } else if (rep->parsed()) {
            std::vector<std::filesystem::path> files(report_files.begin(), report_files.end());
            ltseg::cmd_report(files, report_out, std::cout);
        }
    } catch (const ltseg::DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ltseg::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ltseg/classifier.hpp"
#include "ltseg/confusion.hpp"
#include "ltseg/costsens.hpp"
#include "ltseg/decode.hpp"
#include "ltseg/error.hpp"
#include "ltseg/experiment.hpp"
#include "ltseg/io.hpp"
#include "ltseg/metrics.hpp"
#include "ltseg/seqdata.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace ltseg;

namespace {

void bind_errors(py::module_& m) {
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<EmptySequenceError>(m, "EmptySequenceError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
}

void bind_seqdata(py::module_& m) {
    py::class_<Segment>(m, "Segment")
        .def(py::init<std::size_t, std::size_t, Label>(), py::arg("start"), py::arg("end"), py::arg("label"))
        .def_readwrite("start", &Segment::start)
        .def_readwrite("end", &Segment::end)
        .def_readwrite("label", &Segment::label)
        .def("__eq__", [](const Segment& a, const Segment& b) { return a == b; })
        .def("__repr__", [](const Segment& s) {
            return "Segment(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ", " +
                   std::to_string(s.label) + ")";
        });

    m.def("segmentation_from_frames", [](const std::vector<Label>& y) { return segmentation_from_frames(y); });
    m.def("expand_segmentation", &expand_segmentation);

    py::class_<LabeledSequence>(m, "LabeledSequence")
        .def(py::init<std::string, FeatureMatrix, std::vector<Label>, int>(), py::arg("id"), py::arg("features"),
             py::arg("frame_labels"), py::arg("num_classes"))
        .def_property_readonly("id", &LabeledSequence::id)
        .def_property_readonly("features", &LabeledSequence::features)
        .def_property_readonly("frame_labels", &LabeledSequence::frame_labels)
        .def_property_readonly("prev_action", &LabeledSequence::prev_action)
        .def_property_readonly("segmentation", &LabeledSequence::segmentation)
        .def_property_readonly("num_frames", &LabeledSequence::num_frames);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<std::vector<LabeledSequence>, int, int, std::vector<std::string>>(), py::arg("sequences"),
             py::arg("num_classes"), py::arg("feature_dim"), py::arg("class_names") = std::vector<std::string>{})
        .def_property_readonly("sequences", &Dataset::sequences)
        .def_property_readonly("num_classes", &Dataset::num_classes)
        .def_property_readonly("feature_dim", &Dataset::feature_dim)
        .def_property_readonly("class_names", &Dataset::class_names)
        .def_property_readonly("class_frame_counts", &Dataset::class_frame_counts)
        .def_property_readonly("total_frames", &Dataset::total_frames)
        .def("absent_classes", &Dataset::absent_classes)
        .def("__len__", [](const Dataset& d) { return d.sequences().size(); })
        .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("num_classes", &SynthConfig::num_classes)
        .def_readwrite("feature_dim", &SynthConfig::feature_dim)
        .def_readwrite("num_sequences", &SynthConfig::num_sequences)
        .def_readwrite("mean_segments_per_sequence", &SynthConfig::mean_segments_per_sequence)
        .def_readwrite("class_skew", &SynthConfig::class_skew)
        .def_readwrite("duration_mean", &SynthConfig::duration_mean)
        .def_readwrite("duration_skew", &SynthConfig::duration_skew)
        .def_readwrite("class_duration_means", &SynthConfig::class_duration_means)
        .def_readwrite("duration_spread", &SynthConfig::duration_spread)
        .def_readwrite("mean_scale", &SynthConfig::mean_scale)
        .def_readwrite("emitter_means", &SynthConfig::emitter_means)
        .def_readwrite("noise_scale", &SynthConfig::noise_scale)
        .def_readwrite("transition_skew", &SynthConfig::transition_skew)
        .def_readwrite("rng_seed", &SynthConfig::rng_seed);

    m.def("generate_synthetic", &generate_synthetic, py::arg("config"));

    py::class_<TransitionStats>(m, "TransitionStats")
        .def_readonly("num_classes", &TransitionStats::num_classes)
        .def_readonly("total_frames", &TransitionStats::total_frames)
        .def_property_readonly("counts", [](const TransitionStats& s) { return Eigen::MatrixXd(s.counts.cast<double>()); })
        .def_readonly("transition", &TransitionStats::transition)
        .def_readonly("prior", &TransitionStats::prior)
        .def_property_readonly("valid_mask", [](const TransitionStats& s) {
            return Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>(s.valid_mask.matrix());
        });
    m.def("compute_transition_stats", &compute_transition_stats, py::arg("dataset"));

    py::class_<HeadTailSplit>(m, "HeadTailSplit")
        .def_readonly("head", &HeadTailSplit::head)
        .def_readonly("tail", &HeadTailSplit::tail);
    m.def("head_tail_split",
          [](const std::vector<std::uint64_t>& counts, double threshold) { return head_tail_split(counts, threshold); },
          py::arg("class_frame_counts"), py::arg("threshold"));

    m.def("load_dataset", &io::load_dataset, py::arg("manifest"));
    m.def("save_dataset", &io::save_dataset, py::arg("dataset"), py::arg("directory"));
}

void bind_confusion(py::module_& m) {
    py::class_<ConfusionTensor>(m, "ConfusionTensor")
        .def(py::init<int>())
        .def_property_readonly("num_classes", &ConfusionTensor::num_classes)
        .def_property_readonly("total_frames", &ConfusionTensor::total_frames)
        .def("count", &ConfusionTensor::count)
        .def("add", &ConfusionTensor::add, py::arg("truth"), py::arg("pred"), py::arg("prev"), py::arg("n") = 1)
        .def("confusion_matrix", [](const ConfusionTensor& c) { return Eigen::MatrixXd(c.confusion_matrix().cast<double>()); })
        .def("transition_counts", [](const ConfusionTensor& c) { return Eigen::MatrixXd(c.transition_counts().cast<double>()); })
        .def("to_csv", &ConfusionTensor::to_csv);

    py::class_<LearningState>(m, "LearningState")
        .def_readonly("class_acc", &LearningState::class_acc)
        .def_readonly("mean_trans_acc", &LearningState::mean_trans_acc)
        .def("transition", &LearningState::transition);

    m.def("compute_confusion_from_predictions",
          py::overload_cast<const std::vector<std::vector<Label>>&, const Dataset&>(&compute_confusion),
          py::arg("predictions"), py::arg("dataset"));
    m.def("learning_state", &learning_state, py::arg("confusion"), py::arg("stats"));
}

void bind_costsens(py::module_& m) {
    py::class_<MultiplierState>(m, "MultiplierState")
        .def_static("zeros", &MultiplierState::zeros, py::arg("num_classes"), py::arg("step_size") = kDefaultGamma,
                    py::arg("epsilon") = kDefaultEpsilon)
        .def_readwrite("lambda_", &MultiplierState::lambda)
        .def_readwrite("step_size", &MultiplierState::step_size)
        .def_readwrite("epsilon", &MultiplierState::epsilon)
        .def_readwrite("detached_mean_trans_acc", &MultiplierState::detached_mean_trans_acc);

    py::class_<GainWeights>(m, "GainWeights")
        .def_readonly("gain", &GainWeights::gain)
        .def_readonly("tempered", &GainWeights::tempered)
        .def_readonly("tau", &GainWeights::tau)
        .def_readonly("active", &GainWeights::active);

    m.def("unit_weights", &unit_weights, py::arg("num_classes"));
    m.def("compute_gain", &compute_gain, py::arg("stats"), py::arg("multipliers"), py::arg("tau"),
          py::arg("active") = std::nullopt);
    m.def("softmax", &softmax, py::arg("logits"));
    m.def("weighted_ce_loss", &weighted_ce_loss, py::arg("probs"), py::arg("y"), py::arg("u"), py::arg("weights"));
    m.def("weighted_ce_grad_logits", &weighted_ce_grad_logits, py::arg("logits"), py::arg("y"), py::arg("u"),
          py::arg("weights"));
    m.def("lagrangian_value", &lagrangian_value, py::arg("confusion"), py::arg("stats"), py::arg("multipliers"));
    m.def("update_multipliers", &update_multipliers, py::arg("multipliers"), py::arg("confusion"), py::arg("stats"));
}

void bind_classifier(py::module_& m) {
    py::class_<ClassifierParams>(m, "ClassifierParams")
        .def_static("zeros", &ClassifierParams::zeros, py::arg("num_classes"), py::arg("feature_dim"),
                    py::arg("context_radius"))
        .def_readwrite("weights", &ClassifierParams::weights)
        .def_readwrite("bias", &ClassifierParams::bias)
        .def_readwrite("context_radius", &ClassifierParams::context_radius);

    py::enum_<LossMode>(m, "LossMode")
        .value("plain_ce", LossMode::plain_ce)
        .value("inverse_prior", LossMode::inverse_prior)
        .value("cost_sensitive", LossMode::cost_sensitive);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("batch_sequences", &TrainConfig::batch_sequences)
        .def_readwrite("context_radius", &TrainConfig::context_radius)
        .def_readwrite("tau", &TrainConfig::tau)
        .def_readwrite("epsilon", &TrainConfig::epsilon)
        .def_readwrite("gamma", &TrainConfig::gamma)
        .def_readwrite("rng_seed", &TrainConfig::rng_seed)
        .def_readwrite("loss_mode", &TrainConfig::loss_mode)
        .def_readwrite("confusion_subset", &TrainConfig::confusion_subset);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("params", &TrainResult::params)
        .def_readonly("multipliers", &TrainResult::multipliers)
        .def_readonly("stats", &TrainResult::stats)
        .def_property_readonly("telemetry", [](const TrainResult& r) {
            std::vector<std::string> lines;
            for (const auto& rec : r.telemetry) lines.push_back(rec.to_json());
            return lines;
        });

    m.def("train", [](const Dataset& d, const TrainConfig& c) { return train(d, c); }, py::arg("dataset"),
          py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def("forward", &forward, py::arg("params"), py::arg("sequence"), py::arg("t"));
    m.def("predict_sequence", &predict_sequence, py::arg("params"), py::arg("sequence"));
    m.def("compute_confusion",
          [](const ClassifierParams& p, const Dataset& d) { return compute_confusion(p, d); }, py::arg("params"),
          py::arg("dataset"));
    m.def("bayes_optimal_decision",
          py::overload_cast<const Eigen::Ref<const Eigen::VectorXd>&, const Eigen::Ref<const Eigen::MatrixXd>&>(
              &bayes_optimal_decision),
          py::arg("posteriors"), py::arg("gain"));
    m.def("bayes_optimal_decision_diagonal", &bayes_optimal_decision_diagonal, py::arg("posteriors"),
          py::arg("diagonal"));
    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"), py::arg("epoch"));
    m.def("load_checkpoint", [](const std::filesystem::path& p) {
        auto c = load_checkpoint(p);
        return py::make_tuple(c.params, c.epoch);
    });
}

void bind_decode(py::module_& m) {
    py::class_<ClassMeans>(m, "ClassMeans")
        .def_readonly("means", &ClassMeans::means)
        .def_readonly("support", &ClassMeans::support);
    m.def("compute_class_means",
          [](const Dataset& d, int radius) { return compute_class_means(d, windowed_representation(radius)); },
          py::arg("dataset"), py::arg("context_radius") = 0);
    m.def("ncm_predict", &ncm_predict, py::arg("means"), py::arg("representations"));
    m.def("segment_boundaries", [](const std::vector<Label>& y) { return segment_boundaries(y); });
    m.def("sncm_decode", [](const std::vector<Label>& a, const std::vector<Label>& b) { return sncm_decode(a, b); },
          py::arg("classifier_pred"), py::arg("ncm_pred"));
}

void bind_metrics(py::module_& m) {
    py::class_<FrameAccuracy>(m, "FrameAccuracy")
        .def_readonly("global_", &FrameAccuracy::global)
        .def_readonly("per_class", &FrameAccuracy::per_class)
        .def_readonly("class_recall", &FrameAccuracy::class_recall);
    py::class_<F1Score>(m, "F1Score")
        .def_readonly("global_", &F1Score::global)
        .def_readonly("per_class", &F1Score::per_class)
        .def_readonly("class_f1", &F1Score::class_f1);

    m.def("frame_accuracy",
          [](const std::vector<Label>& p, const std::vector<Label>& y, int L) { return frame_accuracy(p, y, L); },
          py::arg("pred"), py::arg("truth"), py::arg("num_classes"));
    m.def("edit_score", [](const std::vector<Label>& p, const std::vector<Label>& g) { return edit_score(p, g); },
          py::arg("pred_segments"), py::arg("truth_segments"));
    m.def("segmental_f1", &segmental_f1, py::arg("pred"), py::arg("truth"), py::arg("iou_threshold"),
          py::arg("num_classes"));
    m.def(
        "evaluate",
        [](const std::string& name, const std::vector<std::vector<Label>>& preds, const Dataset& truth,
           const HeadTailSplit& split) { return evaluate(name, preds, truth, split).to_json().dump(); },
        py::arg("name"), py::arg("predictions"), py::arg("truth"), py::arg("split"),
        "Evaluates predictions and returns the report as a JSON string.");
}

void bind_experiment(py::module_& m) {
    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const auto config = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(config, resolve_datasets(config));
            }
            std::vector<std::string> telemetry;
            for (const auto& rec : r.training.telemetry) telemetry.push_back(rec.to_json());
            return py::make_tuple(r.report.to_json().dump(), telemetry);
        },
        py::arg("config_json"),
        "Trains and evaluates from an experiment config (JSON text); returns (report JSON, telemetry lines).");
    m.def(
        "default_config", [] { return ExperimentConfig::defaults().to_json().dump(2); },
        "Effective default experiment config as JSON text.");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cost-sensitive learning for long-tailed temporal segmentation";

    bind_errors(m);
    bind_seqdata(m);
    bind_confusion(m);
    bind_costsens(m);
    bind_classifier(m);
    bind_decode(m);
    bind_metrics(m);
    bind_experiment(m);

#ifdef VERSION_INFO
    m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}

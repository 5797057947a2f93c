#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedfuse/dataset.hpp"
#include "fedfuse/dsfusion.hpp"
#include "fedfuse/federation.hpp"
#include "fedfuse/latency.hpp"
#include "fedfuse/metrics.hpp"
#include "fedfuse/nn.hpp"

namespace py = pybind11;
using namespace fedfuse;

PYBIND11_MODULE(_core, m) {
  m.doc() = "federated learning simulator with evidential decision fusion";

  // ---- datasets -----------------------------------------------------------
  py::class_<data::LabeledDataset>(m, "LabeledDataset")
      .def(py::init<>())
      .def_readwrite("features", &data::LabeledDataset::features)
      .def_readwrite("labels", &data::LabeledDataset::labels)
      .def_readwrite("class_names", &data::LabeledDataset::class_names)
      .def("__len__", &data::LabeledDataset::size)
      .def_property_readonly("dim", &data::LabeledDataset::dim)
      .def("label_histogram", &data::LabeledDataset::label_histogram);

  m.def("generate_synthetic", &data::generate_synthetic, py::arg("classes"),
        py::arg("dim"), py::arg("samples_per_class"), py::arg("cluster_spread"),
        py::arg("label_noise"), py::arg("seed"));

  m.def(
      "split_train_val_test",
      [](const data::LabeledDataset& ds, std::array<double, 3> fractions,
         std::uint64_t seed) {
        auto split = data::split_train_val_test(ds, fractions, seed);
        return py::make_tuple(split.train, split.val, split.test);
      },
      py::arg("dataset"), py::arg("fractions"), py::arg("seed"));

  py::class_<data::PartitionPlan> plan(m, "PartitionPlan");
  py::enum_<data::PartitionPlan::Scheme>(plan, "Scheme")
      .value("iid", data::PartitionPlan::Scheme::iid)
      .value("dirichlet", data::PartitionPlan::Scheme::dirichlet);
  plan.def(py::init<>())
      .def_readwrite("scheme", &data::PartitionPlan::scheme)
      .def_readwrite("alpha", &data::PartitionPlan::alpha)
      .def_readwrite("clients", &data::PartitionPlan::clients)
      .def_readwrite("seed", &data::PartitionPlan::seed);
  m.def("partition_clients", &data::partition_clients, py::arg("dataset"),
        py::arg("plan"));
  m.def("load_feature_file", &data::load_feature_file, py::arg("path"));
  m.def("save_feature_file", &data::save_feature_file, py::arg("dataset"),
        py::arg("path"));

  // ---- neural nets --------------------------------------------------------
  py::enum_<nn::Activation>(m, "Activation")
      .value("relu", nn::Activation::relu)
      .value("tanh", nn::Activation::tanh);
  py::enum_<nn::Optimizer>(m, "Optimizer")
      .value("sgd", nn::Optimizer::sgd)
      .value("adam", nn::Optimizer::adam);

  py::class_<nn::MlpSpec>(m, "MlpSpec")
      .def(py::init<>())
      .def_readwrite("layer_widths", &nn::MlpSpec::layer_widths)
      .def_readwrite("activation", &nn::MlpSpec::activation)
      .def_readwrite("head_start", &nn::MlpSpec::head_start)
      .def("param_count", &nn::MlpSpec::param_count);

  py::class_<nn::LayerShape>(m, "LayerShape")
      .def_readonly("rows", &nn::LayerShape::rows)
      .def_readonly("cols", &nn::LayerShape::cols);

  py::class_<nn::WeightVector>(m, "WeightVector")
      .def(py::init<>())
      .def_readwrite("values", &nn::WeightVector::values)
      .def_readonly("shapes", &nn::WeightVector::shapes);

  py::class_<nn::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &nn::TrainConfig::epochs)
      .def_readwrite("batch_size", &nn::TrainConfig::batch_size)
      .def_readwrite("learning_rate", &nn::TrainConfig::learning_rate)
      .def_readwrite("optimizer", &nn::TrainConfig::optimizer)
      .def_readwrite("beta1", &nn::TrainConfig::beta1)
      .def_readwrite("beta2", &nn::TrainConfig::beta2)
      .def_readwrite("epsilon", &nn::TrainConfig::epsilon)
      .def_readwrite("seed", &nn::TrainConfig::seed);

  m.def("init_model", &nn::init_model, py::arg("spec"), py::arg("seed"));
  m.def(
      "forward",
      [](const nn::WeightVector& w, const nn::MlpSpec& spec,
         const std::vector<double>& x) { return nn::forward(w, spec, x); },
      py::arg("weights"), py::arg("spec"), py::arg("x"));
  m.def(
      "train_local",
      [](const nn::WeightVector& w, const nn::MlpSpec& spec,
         const data::LabeledDataset& ds, const nn::TrainConfig& cfg,
         std::size_t frozen_below) {
        auto result = nn::train_local(w, spec, ds, cfg, frozen_below);
        return py::make_tuple(result.weights, result.final_epoch_loss);
      },
      py::arg("weights"), py::arg("spec"), py::arg("dataset"), py::arg("config"),
      py::arg("frozen_below") = 0);
  m.def(
      "evaluate",
      [](const nn::WeightVector& w, const nn::MlpSpec& spec,
         const data::LabeledDataset& ds) {
        const auto eval = nn::evaluate(w, spec, ds);
        return py::make_tuple(eval.loss, eval.accuracy);
      },
      py::arg("weights"), py::arg("spec"), py::arg("dataset"));
  m.def("save_checkpoint", &nn::save_checkpoint, py::arg("weights"),
        py::arg("path"));
  m.def("load_checkpoint", &nn::load_checkpoint, py::arg("path"));

  // ---- federation ---------------------------------------------------------
  py::class_<fed::ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def_readwrite("name", &fed::ModelSpec::name)
      .def_readwrite("spec", &fed::ModelSpec::spec);

  py::class_<fed::FederationConfig>(m, "FederationConfig")
      .def(py::init<>())
      .def_readwrite("num_clients", &fed::FederationConfig::num_clients)
      .def_readwrite("rounds", &fed::FederationConfig::rounds)
      .def_readwrite("client_fraction", &fed::FederationConfig::client_fraction)
      .def_readwrite("models", &fed::FederationConfig::models)
      .def_readwrite("train", &fed::FederationConfig::train)
      .def_readwrite("partition_scheme", &fed::FederationConfig::partition_scheme)
      .def_readwrite("dirichlet_alpha", &fed::FederationConfig::dirichlet_alpha)
      .def_readwrite("seed", &fed::FederationConfig::seed)
      .def_readwrite("threads", &fed::FederationConfig::threads);

  py::class_<fed::ClientRoundEntry>(m, "ClientRoundEntry")
      .def_readonly("client_id", &fed::ClientRoundEntry::client_id)
      .def_readonly("model", &fed::ClientRoundEntry::model)
      .def_readonly("train_loss", &fed::ClientRoundEntry::train_loss)
      .def_readonly("eval_loss", &fed::ClientRoundEntry::eval_loss)
      .def_readonly("eval_accuracy", &fed::ClientRoundEntry::eval_accuracy);
  py::class_<fed::GlobalRoundEntry>(m, "GlobalRoundEntry")
      .def_readonly("model", &fed::GlobalRoundEntry::model)
      .def_readonly("eval_loss", &fed::GlobalRoundEntry::eval_loss)
      .def_readonly("eval_accuracy", &fed::GlobalRoundEntry::eval_accuracy);
  py::class_<fed::RoundRecord>(m, "RoundRecord")
      .def_readonly("round_index", &fed::RoundRecord::round_index)
      .def_readonly("clients", &fed::RoundRecord::clients)
      .def_readonly("globals", &fed::RoundRecord::globals)
      .def_readonly("duration_ms", &fed::RoundRecord::duration_ms);

  py::class_<fed::GlobalModel>(m, "GlobalModel")
      .def_readonly("name", &fed::GlobalModel::name)
      .def_readonly("spec", &fed::GlobalModel::spec)
      .def_readonly("weights", &fed::GlobalModel::weights);

  m.def(
      "fed_avg",
      [](const std::vector<std::tuple<std::uint32_t, nn::WeightVector,
                                      std::size_t>>& updates) {
        std::vector<fed::ClientUpdate> list;
        list.reserve(updates.size());
        for (const auto& [cid, w, count] : updates) {
          list.push_back({cid, w, count});
        }
        return fed::fed_avg(std::move(list));
      },
      py::arg("updates"),
      "Weighted average of (client_id, weights, sample_count) updates.");

  m.def(
      "run_federation",
      [](const fed::FederationConfig& cfg, const data::LabeledDataset& train,
         const data::LabeledDataset* eval_set,
         const std::vector<nn::WeightVector>* initial) {
        auto result = fed::run_federation(cfg, train, eval_set, initial);
        return py::make_tuple(result.models, result.history);
      },
      py::arg("config"), py::arg("train_set"), py::arg("eval_set") = nullptr,
      py::arg("initial_weights") = nullptr);

  m.def("transfer_init", &fed::transfer_init, py::arg("source"),
        py::arg("target_spec"), py::arg("config"));

  m.def(
      "centralized_train",
      [](const data::LabeledDataset& train, const nn::MlpSpec& spec,
         const nn::TrainConfig& cfg, std::size_t total_epochs,
         const data::LabeledDataset* eval_set) {
        auto result =
            fed::centralized_train(train, spec, cfg, total_epochs, eval_set);
        return py::make_tuple(result.weights, result.history);
      },
      py::arg("train_set"), py::arg("spec"), py::arg("config"),
      py::arg("total_epochs"), py::arg("eval_set") = nullptr);

  // ---- evidence fusion ----------------------------------------------------
  py::class_<ds::FrameOfDiscernment>(m, "FrameOfDiscernment")
      .def(py::init<std::vector<std::string>>())
      .def_property_readonly("labels", &ds::FrameOfDiscernment::labels)
      .def("__len__", &ds::FrameOfDiscernment::size)
      .def("full_set", &ds::FrameOfDiscernment::full_set)
      .def("singleton", &ds::FrameOfDiscernment::singleton)
      .def("subset_name", &ds::FrameOfDiscernment::subset_name);

  py::class_<ds::MassFunction>(m, "MassFunction")
      .def(py::init<ds::FrameOfDiscernment,
                    std::vector<std::pair<ds::Subset, double>>>())
      .def_static("vacuous", &ds::MassFunction::vacuous)
      .def_property_readonly("focal", &ds::MassFunction::focal)
      .def("mass", &ds::MassFunction::mass)
      .def("is_bayesian", &ds::MassFunction::is_bayesian);

  py::class_<ds::CombinationResult>(m, "CombinationResult")
      .def_readonly("combined", &ds::CombinationResult::combined)
      .def_readonly("conflict", &ds::CombinationResult::conflict);

  py::class_<ds::Decision>(m, "Decision")
      .def_readonly("index", &ds::Decision::index)
      .def_readonly("label", &ds::Decision::label)
      .def_readonly("belief", &ds::Decision::belief);

  m.def(
      "mass_from_probs",
      [](const ds::FrameOfDiscernment& frame, const std::vector<double>& probs) {
        return ds::mass_from_probs(frame, probs);
      },
      py::arg("frame"), py::arg("probs"));
  m.def("ds_combine", &ds::ds_combine, py::arg("m1"), py::arg("m2"));
  m.def("combine_all", &ds::combine_all, py::arg("masses"));
  m.def("nary_conflict", &ds::nary_conflict, py::arg("masses"));
  m.def("belief", &ds::belief, py::arg("mass"), py::arg("subset"));
  m.def("plausibility", &ds::plausibility, py::arg("mass"), py::arg("subset"));
  m.def("decide_max_belief", &ds::decide_max_belief, py::arg("result"));

  // ---- metrics ------------------------------------------------------------
  py::class_<metrics::ConfusionMatrix>(m, "ConfusionMatrix")
      .def(py::init<std::size_t>())
      .def_static(
          "from_predictions",
          [](const std::vector<int>& truth, const std::vector<int>& pred,
             std::size_t classes) {
            return metrics::ConfusionMatrix::from_predictions(truth, pred,
                                                              classes);
          },
          py::arg("truth"), py::arg("predicted"), py::arg("classes"))
      .def("add", &metrics::ConfusionMatrix::add)
      .def("at", &metrics::ConfusionMatrix::at)
      .def("total", &metrics::ConfusionMatrix::total)
      .def("trace", &metrics::ConfusionMatrix::trace)
      .def_property_readonly("classes", &metrics::ConfusionMatrix::classes);

  py::class_<metrics::BinaryMetrics>(m, "BinaryMetrics")
      .def_readonly("tp", &metrics::BinaryMetrics::tp)
      .def_readonly("fp", &metrics::BinaryMetrics::fp)
      .def_readonly("fn", &metrics::BinaryMetrics::fn)
      .def_readonly("tn", &metrics::BinaryMetrics::tn)
      .def_readonly("accuracy", &metrics::BinaryMetrics::accuracy)
      .def_readonly("precision", &metrics::BinaryMetrics::precision)
      .def_readonly("recall", &metrics::BinaryMetrics::recall)
      .def_readonly("f1", &metrics::BinaryMetrics::f1)
      .def_readonly("specificity", &metrics::BinaryMetrics::specificity)
      .def_readonly("mcc", &metrics::BinaryMetrics::mcc)
      .def("any_degenerate", &metrics::BinaryMetrics::any_degenerate);

  py::class_<metrics::MacroMetrics>(m, "MacroMetrics")
      .def_readonly("accuracy", &metrics::MacroMetrics::accuracy)
      .def_readonly("precision", &metrics::MacroMetrics::precision)
      .def_readonly("recall", &metrics::MacroMetrics::recall)
      .def_readonly("f1", &metrics::MacroMetrics::f1)
      .def_readonly("specificity", &metrics::MacroMetrics::specificity)
      .def_readonly("mcc", &metrics::MacroMetrics::mcc);

  py::class_<metrics::MetricReport>(m, "MetricReport")
      .def_readonly("per_class", &metrics::MetricReport::per_class)
      .def_readonly("macro", &metrics::MetricReport::macro);

  m.def("binary_metrics", &metrics::binary_metrics, py::arg("tp"), py::arg("fp"),
        py::arg("fn"), py::arg("tn"));
  m.def("macro_report", &metrics::macro_report, py::arg("confusion_matrix"));

  // ---- latency ------------------------------------------------------------
  py::enum_<lat::Stage>(m, "Stage")
      .value("preprocessing", lat::Stage::preprocessing)
      .value("processing", lat::Stage::processing)
      .value("fusion", lat::Stage::fusion)
      .value("other", lat::Stage::other);

  py::class_<lat::NodeTiming>(m, "NodeTiming")
      .def_readonly("name", &lat::NodeTiming::name)
      .def_readonly("stage", &lat::NodeTiming::stage)
      .def_property_readonly(
          "transfer_ms",
          [](const lat::NodeTiming& t) { return lat::us_to_ms(t.transfer_us); })
      .def_property_readonly(
          "exec_ms",
          [](const lat::NodeTiming& t) { return lat::us_to_ms(t.exec_us); })
      .def_property_readonly("response_ms", [](const lat::NodeTiming& t) {
        return lat::us_to_ms(t.response_us);
      });

  py::class_<lat::PipelineTiming>(m, "PipelineTiming")
      .def_readonly("nodes", &lat::PipelineTiming::nodes)
      .def_property_readonly(
          "total_ms",
          [](const lat::PipelineTiming& t) { return lat::us_to_ms(t.total_us); })
      .def_property_readonly("stage_ms", [](const lat::PipelineTiming& t) {
        std::map<std::string, double> out;
        out["preprocessing"] = lat::us_to_ms(t.stage_us[0]);
        out["processing"] = lat::us_to_ms(t.stage_us[1]);
        out["fusion"] = lat::us_to_ms(t.stage_us[2]);
        out["other"] = lat::us_to_ms(t.stage_us[3]);
        return out;
      });

  m.def(
      "pipeline_timing",
      [](const std::string& path) {
        const auto file = lat::load_pipeline_file(path);
        return lat::total_time(file.pipeline, file.links);
      },
      py::arg("path"), "Load a pipeline description file and time it.");
}

#include "fedfuse/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fedfuse/errors.hpp"
#include "json.hpp"

namespace fedfuse {

namespace {

using nlohmann::json;

SyntheticParams synthetic_from_json(const json& j) {
  SyntheticParams p;
  p.classes = j.value("classes", p.classes);
  p.dim = j.value("dim", p.dim);
  p.samples_per_class = j.value("samples_per_class", p.samples_per_class);
  p.cluster_spread = j.value("cluster_spread", p.cluster_spread);
  p.label_noise = j.value("label_noise", p.label_noise);
  p.seed = j.value("seed", p.seed);
  return p;
}

json synthetic_to_json(const SyntheticParams& p) {
  return json{{"classes", p.classes},
              {"dim", p.dim},
              {"samples_per_class", p.samples_per_class},
              {"cluster_spread", p.cluster_spread},
              {"label_noise", p.label_noise},
              {"seed", p.seed}};
}

nn::Activation activation_from_string(const std::string& s) {
  if (s == "relu") return nn::Activation::relu;
  if (s == "tanh") return nn::Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string activation_name(nn::Activation a) {
  return a == nn::Activation::relu ? "relu" : "tanh";
}

nn::Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return nn::Optimizer::sgd;
  if (s == "adam") return nn::Optimizer::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

std::string optimizer_name(nn::Optimizer o) {
  return o == nn::Optimizer::sgd ? "sgd" : "adam";
}

}  // namespace

std::size_t OutputSection::cadence_interval() const {
  if (checkpoint_cadence == "final" || checkpoint_cadence == "none") return 0;
  std::size_t interval = 0;
  const auto res = std::from_chars(
      checkpoint_cadence.data(),
      checkpoint_cadence.data() + checkpoint_cadence.size(), interval);
  if (res.ec != std::errc() ||
      res.ptr != checkpoint_cadence.data() + checkpoint_cadence.size() ||
      interval == 0) {
    throw ConfigError("checkpoint_cadence must be 'final', 'none', or a "
                      "positive round interval");
  }
  return interval;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  try {
    if (doc.contains("dataset")) {
      const auto& jd = doc["dataset"];
      if (jd.contains("synthetic")) {
        cfg.dataset.synthetic = synthetic_from_json(jd["synthetic"]);
      }
      cfg.dataset.feature_file = jd.value("feature_file", std::string());
      if (jd.contains("split")) {
        const auto split = jd["split"].get<std::vector<double>>();
        if (split.size() != 3) {
          throw ConfigError("dataset.split needs three fractions");
        }
        std::copy(split.begin(), split.end(), cfg.dataset.split.begin());
      }
      cfg.dataset.split_seed = jd.value("split_seed", cfg.dataset.split_seed);
    }
    if (!cfg.dataset.synthetic && cfg.dataset.feature_file.empty()) {
      cfg.dataset.synthetic = SyntheticParams{};
    }

    if (doc.contains("federation")) {
      const auto& jf = doc["federation"];
      cfg.federation.num_clients = jf.value("clients", cfg.federation.num_clients);
      cfg.federation.rounds = jf.value("rounds", cfg.federation.rounds);
      cfg.federation.client_fraction =
          jf.value("client_fraction", cfg.federation.client_fraction);
      cfg.federation.seed = jf.value("seed", cfg.federation.seed);
      if (jf.contains("models")) {
        for (const auto& jm : jf["models"]) {
          fed::ModelSpec ms;
          ms.name = jm.at("name").get<std::string>();
          ms.spec.layer_widths =
              jm.at("widths").get<std::vector<std::size_t>>();
          ms.spec.activation =
              activation_from_string(jm.value("activation", "relu"));
          ms.spec.head_start = jm.value("head_start", std::size_t{0});
          cfg.federation.models.push_back(std::move(ms));
        }
      }
      if (jf.contains("train")) {
        const auto& jt = jf["train"];
        auto& t = cfg.federation.train;
        t.epochs = jt.value("epochs", t.epochs);
        t.batch_size = jt.value("batch_size", t.batch_size);
        t.learning_rate = jt.value("learning_rate", t.learning_rate);
        t.optimizer = optimizer_from_string(jt.value("optimizer", "adam"));
        t.beta1 = jt.value("beta1", t.beta1);
        t.beta2 = jt.value("beta2", t.beta2);
        t.epsilon = jt.value("epsilon", t.epsilon);
      }
      if (jf.contains("partition")) {
        const auto& jp = jf["partition"];
        const std::string scheme = jp.value("scheme", "iid");
        if (scheme == "iid") {
          cfg.federation.partition_scheme = data::PartitionPlan::Scheme::iid;
        } else if (scheme == "dirichlet") {
          cfg.federation.partition_scheme =
              data::PartitionPlan::Scheme::dirichlet;
          cfg.federation.dirichlet_alpha =
              jp.value("alpha", cfg.federation.dirichlet_alpha);
        } else {
          throw ConfigError("unknown partition scheme '" + scheme + "'");
        }
      }
    }

    if (doc.contains("transfer")) {
      const auto& jt = doc["transfer"];
      cfg.transfer.enabled = jt.value("enabled", false);
      cfg.transfer.head_start = jt.value("head_start", cfg.transfer.head_start);
      cfg.transfer.epochs = jt.value("epochs", cfg.transfer.epochs);
      if (jt.contains("source")) {
        cfg.transfer.source = synthetic_from_json(jt["source"]);
      }
      cfg.transfer.source_feature_file =
          jt.value("feature_file", std::string());
      if (cfg.transfer.enabled && !cfg.transfer.source &&
          cfg.transfer.source_feature_file.empty()) {
        throw ConfigError("transfer is enabled but no source task is given");
      }
    }

    if (doc.contains("fusion")) {
      const auto& jf = doc["fusion"];
      cfg.fusion.enabled = jf.value("enabled", false);
      if (jf.contains("models")) {
        cfg.fusion.models = jf["models"].get<std::vector<std::string>>();
      }
    }
    if (cfg.fusion.enabled && cfg.fusion.models.empty()) {
      for (const auto& m : cfg.federation.models) {
        cfg.fusion.models.push_back(m.name);
      }
    }

    if (doc.contains("output")) {
      const auto& jo = doc["output"];
      cfg.output.dir = jo.value("dir", cfg.output.dir);
      if (jo.contains("checkpoint_cadence")) {
        const auto& jc = jo["checkpoint_cadence"];
        cfg.output.checkpoint_cadence =
            jc.is_number_integer()
                ? std::to_string(jc.get<std::size_t>())
                : jc.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config structure: ") + e.what());
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  federation.validate();
  double fsum = 0.0;
  for (const double f : dataset.split) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    fsum += f;
  }
  if (std::abs(fsum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  for (const auto& name : fusion.models) {
    const bool known = std::any_of(
        federation.models.begin(), federation.models.end(),
        [&](const fed::ModelSpec& m) { return m.name == name; });
    if (!known) {
      throw ConfigError("fusion references unknown model '" + name + "'");
    }
  }
  if (transfer.enabled) {
    for (const auto& m : federation.models) {
      if (transfer.head_start >= m.spec.num_layers()) {
        throw ConfigError("transfer head_start " +
                          std::to_string(transfer.head_start) +
                          " is out of range for model " + m.name);
      }
    }
    if (!transfer.source && transfer.source_feature_file.empty()) {
      throw ConfigError("transfer is enabled but no source task is given");
    }
  }
  (void)output.cadence_interval();  // validates the cadence string
  if (output.dir.empty()) throw ConfigError("output.dir must be set");
}

std::string ExperimentConfig::echo_json() const {
  json doc;
  json jd;
  if (dataset.synthetic) jd["synthetic"] = synthetic_to_json(*dataset.synthetic);
  if (!dataset.feature_file.empty()) jd["feature_file"] = dataset.feature_file;
  jd["split"] = dataset.split;
  jd["split_seed"] = dataset.split_seed;
  doc["dataset"] = jd;

  json jf;
  jf["clients"] = federation.num_clients;
  jf["rounds"] = federation.rounds;
  jf["client_fraction"] = federation.client_fraction;
  jf["seed"] = federation.seed;
  jf["threads"] = federation.threads;
  json jmodels = json::array();
  for (const auto& m : federation.models) {
    jmodels.push_back(json{{"name", m.name},
                           {"widths", m.spec.layer_widths},
                           {"activation", activation_name(m.spec.activation)},
                           {"head_start", m.spec.head_start}});
  }
  jf["models"] = jmodels;
  jf["train"] = json{{"epochs", federation.train.epochs},
                     {"batch_size", federation.train.batch_size},
                     {"learning_rate", federation.train.learning_rate},
                     {"optimizer", optimizer_name(federation.train.optimizer)},
                     {"beta1", federation.train.beta1},
                     {"beta2", federation.train.beta2},
                     {"epsilon", federation.train.epsilon}};
  json jp;
  jp["scheme"] = federation.partition_scheme == data::PartitionPlan::Scheme::iid
                     ? "iid"
                     : "dirichlet";
  if (federation.partition_scheme == data::PartitionPlan::Scheme::dirichlet) {
    jp["alpha"] = federation.dirichlet_alpha;
  }
  jf["partition"] = jp;
  doc["federation"] = jf;

  json jt;
  jt["enabled"] = transfer.enabled;
  if (transfer.enabled) {
    jt["head_start"] = transfer.head_start;
    jt["epochs"] = transfer.epochs;
    if (transfer.source) jt["source"] = synthetic_to_json(*transfer.source);
    if (!transfer.source_feature_file.empty()) {
      jt["feature_file"] = transfer.source_feature_file;
    }
  }
  doc["transfer"] = jt;

  json ju;
  ju["enabled"] = fusion.enabled;
  if (fusion.enabled) ju["models"] = fusion.models;
  doc["fusion"] = ju;

  doc["output"] = json{{"dir", output.dir},
                       {"checkpoint_cadence", output.checkpoint_cadence}};
  return doc.dump(2);
}

}  // namespace fedfuse

#include "fedfuse/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedfuse/errors.hpp"
#include "fedfuse/rng.hpp"

namespace fedfuse::fed {

namespace {

constexpr std::uint64_t kInitTag = 0x51;
constexpr std::uint64_t kTrainTag = 0x52;
constexpr std::uint64_t kSelectTag = 0x53;
constexpr std::uint64_t kPartitionTag = 0x54;
constexpr std::uint64_t kTransferTag = 0x55;

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// claimed exactly once; results land in caller-owned slots, so the outcome
/// does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::size_t FederationConfig::selected_count() const {
  const auto want = static_cast<std::size_t>(
      std::llround(client_fraction * static_cast<double>(num_clients)));
  return std::max<std::size_t>(1, std::min(want, num_clients));
}

void FederationConfig::validate() const {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(client_fraction > 0.0 && client_fraction <= 1.0)) {
    throw ConfigError("client_fraction must lie in (0, 1]");
  }
  if (models.empty()) throw ConfigError("federation needs at least one model");
  std::vector<std::string> names;
  for (const auto& m : models) {
    if (m.name.empty()) throw ConfigError("model names must be non-empty");
    if (std::find(names.begin(), names.end(), m.name) != names.end()) {
      throw ConfigError("duplicate model name: " + m.name);
    }
    names.push_back(m.name);
    m.spec.validate();
  }
  train.validate();
  if (partition_scheme == data::PartitionPlan::Scheme::dirichlet &&
      !(dirichlet_alpha > 0.0)) {
    throw ConfigError("dirichlet alpha must be > 0");
  }
}

nn::WeightVector fed_avg(std::vector<ClientUpdate> updates) {
  if (updates.empty()) {
    throw ProtocolError("fed_avg needs at least one update");
  }
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) {
              return a.client_id < b.client_id;
            });
  for (std::size_t i = 1; i < updates.size(); ++i) {
    if (updates[i].client_id == updates[i - 1].client_id) {
      throw ProtocolError("duplicate client id " +
                          std::to_string(updates[i].client_id) +
                          " in update list");
    }
  }
  const auto& first = updates.front().weights;
  std::size_t total = 0;
  for (const auto& u : updates) {
    if (u.sample_count < 1) {
      throw ProtocolError("client " + std::to_string(u.client_id) +
                          " reports zero samples");
    }
    if (u.weights.values.size() != first.values.size() ||
        u.weights.shapes != first.shapes) {
      throw ShapeError("client " + std::to_string(u.client_id) +
                       " update has mismatched shape");
    }
    total += u.sample_count;
  }

  const double d = static_cast<double>(total);
  double coeff_sum = 0.0;
  std::vector<double> coeff(updates.size());
  for (std::size_t k = 0; k < updates.size(); ++k) {
    coeff[k] = static_cast<double>(updates[k].sample_count) / d;
    coeff_sum += coeff[k];
  }
  if (std::abs(coeff_sum - 1.0) > 1e-12) {
    throw ProtocolError("aggregation coefficients do not sum to 1");
  }

  nn::WeightVector out;
  out.shapes = first.shapes;
  out.values.assign(first.values.size(), 0.0);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const double c = coeff[k];
    const auto& v = updates[k].weights.values;
    for (std::size_t i = 0; i < v.size(); ++i) out.values[i] += c * v[i];
  }
  return out;
}

double federated_objective(const nn::WeightVector& global_weights,
                           const nn::MlpSpec& spec,
                           const std::vector<ClientState>& clients,
                           const std::string&) {
  if (clients.empty()) {
    throw ProtocolError("federated objective needs at least one client");
  }
  std::size_t total = 0;
  for (const auto& c : clients) total += c.sample_count();
  double objective = 0.0;
  for (const auto& c : clients) {
    const double share =
        static_cast<double>(c.sample_count()) / static_cast<double>(total);
    objective += share * nn::evaluate(global_weights, spec, c.partition).loss;
  }
  return objective;
}

std::uint64_t init_seed(std::uint64_t base, std::size_t model_index) {
  return rng::derive(base, kInitTag, model_index);
}

std::uint64_t train_seed(std::uint64_t base, std::size_t round,
                         std::uint32_t client_id, std::size_t model_index) {
  return rng::derive(base, kTrainTag, round, client_id, model_index);
}

std::vector<ClientState> make_clients(const data::LabeledDataset& train_set,
                                      const FederationConfig& cfg) {
  data::PartitionPlan plan;
  plan.scheme = cfg.partition_scheme;
  plan.alpha = cfg.dirichlet_alpha;
  plan.clients = cfg.num_clients;
  plan.seed = rng::derive(cfg.seed, kPartitionTag);
  auto parts = data::partition_clients(train_set, plan);

  std::vector<ClientState> clients(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    clients[i].client_id = static_cast<std::uint32_t>(i);
    clients[i].partition = std::move(parts[i]);
  }
  return clients;
}

std::vector<std::uint32_t> select_clients(const FederationConfig& cfg,
                                          std::size_t round) {
  std::vector<std::uint32_t> ids(cfg.num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  rng::Stream s(rng::derive(cfg.seed, kSelectTag, round));
  s.shuffle(ids);
  ids.resize(cfg.selected_count());
  std::sort(ids.begin(), ids.end());
  return ids;
}

RoundRecord run_round(std::vector<ClientState>& clients,
                      std::vector<GlobalModel>& models,
                      const FederationConfig& cfg, std::size_t round,
                      const data::LabeledDataset* eval_set) {
  const auto start = std::chrono::steady_clock::now();
  const auto selected = select_clients(cfg, round);

  struct ClientResult {
    std::vector<nn::WeightVector> weights;  // one per model
    std::vector<double> train_loss;
    std::vector<double> eval_loss;
    std::vector<double> eval_accuracy;
    std::exception_ptr error;
  };
  std::vector<ClientResult> results(selected.size());

  parallel_for(selected.size(), cfg.threads, [&](std::size_t slot) {
    auto& res = results[slot];
    const auto cid = selected[slot];
    const auto& client = clients[cid];
    try {
      for (std::size_t m = 0; m < models.size(); ++m) {
        nn::TrainConfig local_cfg = cfg.train;
        local_cfg.seed = train_seed(cfg.seed, round, cid, m);
        auto trained =
            nn::train_local(models[m].weights, models[m].spec,
                            client.partition, local_cfg,
                            models[m].spec.head_start);
        const auto eval =
            nn::evaluate(trained.weights, models[m].spec, client.partition);
        res.weights.push_back(std::move(trained.weights));
        res.train_loss.push_back(trained.final_epoch_loss);
        res.eval_loss.push_back(eval.loss);
        res.eval_accuracy.push_back(eval.accuracy);
      }
    } catch (...) {
      res.error = std::current_exception();
    }
  });

  for (std::size_t slot = 0; slot < selected.size(); ++slot) {
    if (!results[slot].error) continue;
    try {
      std::rethrow_exception(results[slot].error);
    } catch (const DivergenceError& e) {
      throw RoundError(std::string("diverged during round ") +
                           std::to_string(round) + " (" + e.what() + ")",
                       selected[slot]);
    }
  }

  RoundRecord record;
  record.round_index = round;
  for (std::size_t m = 0; m < models.size(); ++m) {
    std::vector<ClientUpdate> updates;
    updates.reserve(selected.size());
    for (std::size_t slot = 0; slot < selected.size(); ++slot) {
      const auto cid = selected[slot];
      updates.push_back(ClientUpdate{cid, results[slot].weights[m],
                                     clients[cid].sample_count()});
      record.clients.push_back(ClientRoundEntry{
          cid, models[m].name, results[slot].train_loss[m],
          results[slot].eval_loss[m], results[slot].eval_accuracy[m]});
    }
    models[m].weights = fed_avg(std::move(updates));
  }

  for (auto& client : clients) {
    for (const auto& model : models) {
      client.local_weights[model.name] = model.weights;
    }
  }

  if (eval_set != nullptr) {
    for (const auto& model : models) {
      const auto eval = nn::evaluate(model.weights, model.spec, *eval_set);
      record.globals.push_back(
          GlobalRoundEntry{model.name, eval.loss, eval.accuracy});
    }
  }

  std::sort(record.clients.begin(), record.clients.end(),
            [](const ClientRoundEntry& a, const ClientRoundEntry& b) {
              return a.client_id != b.client_id ? a.client_id < b.client_id
                                                : a.model < b.model;
            });

  record.duration_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - start)
          .count();
  return record;
}

FederationResult run_federation(
    const FederationConfig& cfg, const data::LabeledDataset& train_set,
    const data::LabeledDataset* eval_set,
    const std::vector<nn::WeightVector>* initial_weights,
    const RoundObserver& on_round) {
  cfg.validate();
  train_set.validate();
  for (const auto& m : cfg.models) {
    if (m.spec.num_classes() != train_set.num_classes()) {
      throw ConfigError("model " + m.name + " expects " +
                        std::to_string(m.spec.num_classes()) +
                        " classes, dataset has " +
                        std::to_string(train_set.num_classes()));
    }
    if (m.spec.input_dim() != train_set.dim()) {
      throw ConfigError("model " + m.name + " expects input dim " +
                        std::to_string(m.spec.input_dim()) +
                        ", dataset has " + std::to_string(train_set.dim()));
    }
  }
  if (initial_weights != nullptr && initial_weights->size() != cfg.models.size()) {
    throw ConfigError("initial weights must match the model list");
  }

  FederationResult result;
  result.models.reserve(cfg.models.size());
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    GlobalModel gm;
    gm.name = cfg.models[m].name;
    gm.spec = cfg.models[m].spec;
    if (initial_weights != nullptr) {
      if (!(*initial_weights)[m].matches(gm.spec)) {
        throw ConfigError("initial weights for model " + gm.name +
                          " do not match its spec");
      }
      gm.weights = (*initial_weights)[m];
    } else {
      gm.weights = nn::init_model(gm.spec, init_seed(cfg.seed, m));
    }
    result.models.push_back(std::move(gm));
  }

  auto clients = make_clients(train_set, cfg);
  result.history.reserve(cfg.rounds);
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    result.history.push_back(
        run_round(clients, result.models, cfg, round, eval_set));
    if (on_round) on_round(round, result.models);
  }
  return result;
}

nn::WeightVector transfer_init(const data::LabeledDataset& source,
                               const nn::MlpSpec& target_spec,
                               const nn::TrainConfig& cfg) {
  target_spec.validate();
  source.validate();
  if (source.size() == 0) throw DataError("source dataset is empty");
  if (source.dim() != target_spec.input_dim()) {
    throw ConfigError("source dataset dimension does not match the spec");
  }

  nn::MlpSpec source_spec = target_spec;
  source_spec.layer_widths.back() = source.num_classes();

  nn::TrainConfig source_cfg = cfg;
  source_cfg.seed = rng::derive(cfg.seed, kTransferTag, std::size_t{0});
  const auto source_init =
      nn::init_model(source_spec, rng::derive(cfg.seed, kTransferTag, std::size_t{1}));
  auto trained =
      nn::train_local(source_init, source_spec, source, source_cfg, 0);

  if (source.num_classes() == target_spec.num_classes()) {
    return std::move(trained.weights);
  }

  // Head layers are re-initialized for the target classes; the backbone
  // below head_start is carried over.
  auto target = nn::init_model(
      target_spec, rng::derive(cfg.seed, kTransferTag, std::size_t{2}));
  const std::size_t copy_until =
      std::min(target_spec.head_start, target_spec.num_layers());
  for (std::size_t l = 0; l < copy_until; ++l) {
    const std::size_t off = target.layer_offset(l);
    const std::size_t count = target.shapes[l].param_count();
    std::copy_n(trained.weights.values.begin() +
                    static_cast<std::ptrdiff_t>(off),
                count,
                target.values.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return target;
}

CentralizedResult centralized_train(const data::LabeledDataset& train_set,
                                    const nn::MlpSpec& spec,
                                    const nn::TrainConfig& cfg,
                                    std::size_t total_epochs,
                                    const data::LabeledDataset* eval_set,
                                    const nn::WeightVector* initial_weights) {
  spec.validate();
  cfg.validate();
  if (train_set.size() == 0) throw DataError("training set is empty");

  CentralizedResult result;
  result.weights = initial_weights != nullptr
                       ? *initial_weights
                       : nn::init_model(spec, init_seed(cfg.seed, 0));
  if (!result.weights.matches(spec)) {
    throw ConfigError("initial weights do not match the spec");
  }

  std::size_t remaining = total_epochs;
  std::size_t block = 0;
  while (remaining > 0) {
    nn::TrainConfig block_cfg = cfg;
    block_cfg.epochs = std::min(cfg.epochs, remaining);
    if (block_cfg.epochs == 0) break;
    block_cfg.seed = train_seed(cfg.seed, block, 0, 0);
    auto trained = nn::train_local(result.weights, spec, train_set, block_cfg,
                                   spec.head_start);
    result.weights = std::move(trained.weights);

    RoundRecord record;
    record.round_index = block;
    const auto self_eval = nn::evaluate(result.weights, spec, train_set);
    record.clients.push_back(ClientRoundEntry{
        0, "centralized", trained.final_epoch_loss, self_eval.loss,
        self_eval.accuracy});
    if (eval_set != nullptr) {
      const auto eval = nn::evaluate(result.weights, spec, *eval_set);
      record.globals.push_back(
          GlobalRoundEntry{"centralized", eval.loss, eval.accuracy});
    }
    result.history.push_back(std::move(record));

    remaining -= block_cfg.epochs;
    ++block;
  }
  return result;
}

}  // namespace fedfuse::fed

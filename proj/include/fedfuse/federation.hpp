#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedfuse/dataset.hpp"
#include "fedfuse/nn.hpp"

namespace fedfuse::fed {

/// One federation participant: its data partition and current local models.
struct ClientState {
  std::uint32_t client_id = 0;
  data::LabeledDataset partition;
  std::map<std::string, nn::WeightVector> local_weights;

  std::size_t sample_count() const { return partition.size(); }
};

struct ModelSpec {
  std::string name;
  nn::MlpSpec spec;
};

struct FederationConfig {
  std::size_t num_clients = 1;
  std::size_t rounds = 1;
  double client_fraction = 1.0;
  std::vector<ModelSpec> models;
  nn::TrainConfig train;
  data::PartitionPlan::Scheme partition_scheme =
      data::PartitionPlan::Scheme::iid;
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // max concurrently training clients

  std::size_t selected_count() const;
  void validate() const;
};

struct ClientRoundEntry {
  std::uint32_t client_id = 0;
  std::string model;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
};

struct GlobalRoundEntry {
  std::string model;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
};

struct RoundRecord {
  std::size_t round_index = 0;
  std::vector<ClientRoundEntry> clients;
  std::vector<GlobalRoundEntry> globals;
  double duration_ms = 0.0;  // wall clock; not part of deterministic reports
};

struct ClientUpdate {
  std::uint32_t client_id = 0;
  nn::WeightVector weights;
  std::size_t sample_count = 0;  // d_k
};

/// Sample-count-weighted average of client weights. Updates are summed in
/// ascending client_id order, so the result is bit-identical under any input
/// permutation.
nn::WeightVector fed_avg(std::vector<ClientUpdate> updates);

/// f(w): the d_k-weighted mean of per-client mean losses of the global
/// weights. Over a disjoint partition this equals the pooled mean loss.
double federated_objective(const nn::WeightVector& global_weights,
                           const nn::MlpSpec& spec,
                           const std::vector<ClientState>& clients,
                           const std::string& model_name = {});

struct GlobalModel {
  std::string name;
  nn::MlpSpec spec;
  nn::WeightVector weights;
};

/// Seed derivations shared by the federated and centralized paths, so a
/// single-client federation replays exactly as centralized training.
std::uint64_t init_seed(std::uint64_t base, std::size_t model_index);
std::uint64_t train_seed(std::uint64_t base, std::size_t round,
                         std::uint32_t client_id, std::size_t model_index);

/// Builds client states by partitioning the training set per the config.
std::vector<ClientState> make_clients(const data::LabeledDataset& train_set,
                                      const FederationConfig& cfg);

/// Deterministic per-round client selection (seeded shuffle, then the first
/// selected_count ids, returned sorted).
std::vector<std::uint32_t> select_clients(const FederationConfig& cfg,
                                          std::size_t round);

/// One communication round: broadcast, local training on the selected
/// clients (possibly concurrent), per-model aggregation, and replacement of
/// every client's local models by the new globals. A diverging client aborts
/// the round with its id.
RoundRecord run_round(std::vector<ClientState>& clients,
                      std::vector<GlobalModel>& models,
                      const FederationConfig& cfg, std::size_t round,
                      const data::LabeledDataset* eval_set = nullptr);

struct FederationResult {
  std::vector<GlobalModel> models;
  std::vector<RoundRecord> history;
};

/// Partition, initialize (or take provided initial weights), run all rounds.
/// on_round, when set, observes the global models after each round.
using RoundObserver =
    std::function<void(std::size_t round, const std::vector<GlobalModel>&)>;
FederationResult run_federation(
    const FederationConfig& cfg, const data::LabeledDataset& train_set,
    const data::LabeledDataset* eval_set = nullptr,
    const std::vector<nn::WeightVector>* initial_weights = nullptr,
    const RoundObserver& on_round = {});

/// Trains a model on a source task; the layers below target_spec.head_start
/// then serve as a frozen backbone for federation. When the source class
/// count differs from the target's, the head layers are re-initialized for
/// the target shape.
nn::WeightVector transfer_init(const data::LabeledDataset& source,
                               const nn::MlpSpec& target_spec,
                               const nn::TrainConfig& cfg);

struct CentralizedResult {
  nn::WeightVector weights;
  std::vector<RoundRecord> history;
};

/// Single-site baseline over the pooled dataset. Epochs run in blocks of
/// cfg.epochs with the optimizer state reset per block and the same seed
/// derivations as federation, so one client at fraction 1 reproduces it
/// bit-identically.
CentralizedResult centralized_train(
    const data::LabeledDataset& train_set, const nn::MlpSpec& spec,
    const nn::TrainConfig& cfg, std::size_t total_epochs,
    const data::LabeledDataset* eval_set = nullptr,
    const nn::WeightVector* initial_weights = nullptr);

}  // namespace fedfuse::fed

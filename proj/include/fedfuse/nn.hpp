#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedfuse/dataset.hpp"

namespace fedfuse::nn {

enum class Activation { relu, tanh };

/// Dense multilayer perceptron layout: layer_widths = input dim, hidden
/// widths..., class count. head_start marks the first layer that belongs to
/// the trainable head when a frozen backbone is used; 0 means no backbone.
struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::relu;
  std::size_t head_start = 0;

  std::size_t num_layers() const { return layer_widths.size() - 1; }
  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t num_classes() const { return layer_widths.back(); }
  std::size_t param_count() const;
  void validate() const;
};

struct LayerShape {
  std::uint32_t rows = 0;  // fan-in
  std::uint32_t cols = 0;  // fan-out; bias length equals cols
  std::size_t weight_count() const {
    return static_cast<std::size_t>(rows) * cols;
  }
  std::size_t param_count() const { return weight_count() + cols; }
  bool operator==(const LayerShape&) const = default;
};

/// Flat parameter vector with shape metadata. Per-layer layout is the weight
/// matrix in row-major order followed by the bias vector.
struct WeightVector {
  std::vector<double> values;
  std::vector<LayerShape> shapes;

  std::size_t layer_offset(std::size_t layer) const;
  std::size_t num_layers() const { return shapes.size(); }
  bool matches(const MlpSpec& spec) const;
  void validate() const;
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Scaled uniform initialization in +-sqrt(6 / (fan_in + fan_out)) per layer,
/// zero biases. Deterministic in (spec, seed).
WeightVector init_model(const MlpSpec& spec, std::uint64_t seed);

/// Class probabilities for one input (softmax over the final layer).
std::vector<double> forward(const WeightVector& w, const MlpSpec& spec,
                            std::span<const double> x);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  WeightVector weights;
  double final_epoch_loss = 0.0;
};

/// Mini-batch training with cross-entropy loss. Layers with index below
/// frozen_below keep their input parameters bit-identically. Batch order is
/// reshuffled each epoch from (cfg.seed, epoch). The returned loss is the
/// mean cross-entropy over the final epoch; with epochs == 0 the input
/// weights come back unchanged and the loss is their evaluation loss.
TrainResult train_local(const WeightVector& w, const MlpSpec& spec,
                        const data::LabeledDataset& dataset,
                        const TrainConfig& cfg, std::size_t frozen_below = 0);

/// Mean cross-entropy and argmax accuracy over a dataset.
EvalResult evaluate(const WeightVector& w, const MlpSpec& spec,
                    const data::LabeledDataset& dataset);

/// Cross-entropy loss of one example; the analytic gradient is accumulated
/// into grad (same layout as w.values, must be pre-sized and zeroed by the
/// caller across a batch).
double loss_and_gradient(const WeightVector& w, const MlpSpec& spec,
                         std::span<const double> x, int label,
                         std::vector<double>& grad);

/// Binary checkpoint: "FMW1" magic, version byte, layer count and per-layer
/// (rows, cols) as 32-bit little-endian integers, then parameters as 32-bit
/// little-endian floats in layer order.
void save_checkpoint(const WeightVector& w, const std::string& path);
WeightVector load_checkpoint(const std::string& path);

}  // namespace fedfuse::nn

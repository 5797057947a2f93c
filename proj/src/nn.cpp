#include "fedfuse/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedfuse/errors.hpp"
#include "fedfuse/rng.hpp"

namespace fedfuse::nn {

namespace {

constexpr std::uint64_t kInitTag = 0x41;
constexpr std::uint64_t kEpochTag = 0x42;
constexpr double kProbFloor = 1e-12;

double activate(double z, Activation a) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_grad(double z, Activation a) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

void softmax_inplace(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

/// Reusable per-call buffers; training touches these once per sample, so
/// they must not reallocate inside the loop.
struct Scratch {
  std::vector<std::vector<double>> z;  // pre-activations per layer
  std::vector<std::vector<double>> a;  // activations; a[0] is the input
  std::vector<double> delta;
  std::vector<double> delta_prev;

  void prepare(const MlpSpec& spec) {
    z.resize(spec.num_layers());
    a.resize(spec.num_layers() + 1);
  }
};

/// Per-layer activations for one input; fills pre-activations (z) and
/// post-activations (a).
void forward_pass(const WeightVector& w, const MlpSpec& spec,
                  std::span<const double> x, Scratch& s) {
  const std::size_t layers = spec.num_layers();
  s.a[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const auto shape = w.shapes[l];
    const std::size_t off = w.layer_offset(l);
    const double* wm = w.values.data() + off;
    const double* bias = wm + shape.weight_count();
    auto& zl = s.z[l];
    zl.assign(shape.cols, 0.0);
    const auto& prev = s.a[l];
    for (std::size_t i = 0; i < shape.rows; ++i) {
      const double ai = prev[i];
      if (ai == 0.0) continue;
      const double* row = wm + i * shape.cols;
      for (std::size_t j = 0; j < shape.cols; ++j) zl[j] += ai * row[j];
    }
    for (std::size_t j = 0; j < shape.cols; ++j) zl[j] += bias[j];
    auto& al = s.a[l + 1];
    al = zl;
    if (l + 1 < layers) {
      for (auto& v : al) v = activate(v, spec.activation);
    } else {
      softmax_inplace(al);
    }
  }
}

double sample_loss_and_gradient(const WeightVector& w, const MlpSpec& spec,
                                std::span<const double> x, int label,
                                std::vector<double>& grad, Scratch& s) {
  const std::size_t layers = spec.num_layers();
  forward_pass(w, spec, x, s);

  const auto& probs = s.a[layers];
  const double py = probs[static_cast<std::size_t>(label)];
  const double loss = -std::log(std::max(py, kProbFloor));

  // delta starts as the softmax + cross-entropy gradient.
  s.delta = probs;
  s.delta[static_cast<std::size_t>(label)] -= 1.0;

  for (std::size_t l = layers; l-- > 0;) {
    const auto shape = w.shapes[l];
    const std::size_t off = w.layer_offset(l);
    double* gw = grad.data() + off;
    double* gb = gw + shape.weight_count();
    const auto& prev = s.a[l];
    for (std::size_t i = 0; i < shape.rows; ++i) {
      const double ai = prev[i];
      if (ai != 0.0) {
        double* row = gw + i * shape.cols;
        for (std::size_t j = 0; j < shape.cols; ++j) row[j] += ai * s.delta[j];
      }
    }
    for (std::size_t j = 0; j < shape.cols; ++j) gb[j] += s.delta[j];
    if (l == 0) break;
    const double* wm = w.values.data() + off;
    s.delta_prev.assign(shape.rows, 0.0);
    for (std::size_t i = 0; i < shape.rows; ++i) {
      const double* row = wm + i * shape.cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < shape.cols; ++j) acc += row[j] * s.delta[j];
      s.delta_prev[i] = acc * activate_grad(s.z[l - 1][i], spec.activation);
    }
    std::swap(s.delta, s.delta_prev);
  }
  return loss;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

}  // namespace

std::size_t MlpSpec::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
    total += layer_widths[l] * layer_widths[l + 1] + layer_widths[l + 1];
  }
  return total;
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw ConfigError("mlp spec needs at least input and output widths");
  }
  for (const std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("mlp layer widths must be positive");
  }
  if (head_start >= num_layers()) {
    throw ConfigError("head_start must be below the layer count");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (optimizer == Optimizer::adam) {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw ConfigError("adam betas must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
  }
}

std::size_t WeightVector::layer_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += shapes[l].param_count();
  return off;
}

bool WeightVector::matches(const MlpSpec& spec) const {
  if (shapes.size() != spec.num_layers()) return false;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    if (shapes[l].rows != spec.layer_widths[l] ||
        shapes[l].cols != spec.layer_widths[l + 1]) {
      return false;
    }
  }
  return values.size() == spec.param_count();
}

void WeightVector::validate() const {
  std::size_t total = 0;
  for (const auto& s : shapes) total += s.param_count();
  if (total != values.size()) {
    throw ShapeError("weight vector length does not match its shapes");
  }
  for (const double v : values) {
    if (!std::isfinite(v)) throw ShapeError("weight vector holds non-finite values");
  }
}

WeightVector init_model(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  WeightVector w;
  w.shapes.reserve(spec.num_layers());
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    w.shapes.push_back({static_cast<std::uint32_t>(spec.layer_widths[l]),
                        static_cast<std::uint32_t>(spec.layer_widths[l + 1])});
  }
  w.values.assign(spec.param_count(), 0.0);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto shape = w.shapes[l];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(shape.rows + shape.cols));
    rng::Stream s(rng::derive(seed, kInitTag, l));
    double* wm = w.values.data() + w.layer_offset(l);
    for (std::size_t i = 0; i < shape.weight_count(); ++i) {
      wm[i] = s.next_uniform(-limit, limit);
    }
    // biases stay zero
  }
  return w;
}

std::vector<double> forward(const WeightVector& w, const MlpSpec& spec,
                            std::span<const double> x) {
  spec.validate();
  if (!w.matches(spec)) throw ShapeError("weights do not match the mlp spec");
  if (x.size() != spec.input_dim()) {
    throw ShapeError("input length " + std::to_string(x.size()) +
                     " does not match input width " +
                     std::to_string(spec.input_dim()));
  }
  Scratch scratch;
  scratch.prepare(spec);
  forward_pass(w, spec, x, scratch);
  return scratch.a[spec.num_layers()];
}

double loss_and_gradient(const WeightVector& w, const MlpSpec& spec,
                         std::span<const double> x, int label,
                         std::vector<double>& grad) {
  Scratch scratch;
  scratch.prepare(spec);
  return sample_loss_and_gradient(w, spec, x, label, grad, scratch);
}

TrainResult train_local(const WeightVector& w, const MlpSpec& spec,
                        const data::LabeledDataset& dataset,
                        const TrainConfig& cfg, std::size_t frozen_below) {
  spec.validate();
  cfg.validate();
  if (!w.matches(spec)) throw ShapeError("weights do not match the mlp spec");
  if (dataset.size() == 0) throw DataError("cannot train on an empty dataset");
  dataset.validate();
  if (dataset.dim() != spec.input_dim()) {
    throw ShapeError("dataset dimension does not match the model input width");
  }
  for (const int y : dataset.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes()) {
      throw DataError("label out of range for the model class count");
    }
  }
  if (cfg.epochs == 0) {
    return TrainResult{w, evaluate(w, spec, dataset).loss};
  }

  TrainResult result{w, 0.0};
  auto& weights = result.weights;
  const std::size_t n = dataset.size();
  const std::size_t params = weights.values.size();
  const std::size_t trainable_from =
      frozen_below >= weights.num_layers() ? params
                                           : weights.layer_offset(frozen_below);

  AdamState adam;
  if (cfg.optimizer == Optimizer::adam) {
    adam.m.assign(params, 0.0);
    adam.v.assign(params, 0.0);
  }

  std::vector<std::size_t> order(n);
  std::vector<double> grad(params, 0.0);
  double final_epoch_loss = 0.0;
  Scratch scratch;
  scratch.prepare(spec);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng::Stream shuffle_stream(rng::derive(cfg.seed, kEpochTag, epoch));
    shuffle_stream.shuffle(order);

    double epoch_loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::size_t bsize = stop - start;
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t idx = order[i];
        batch_loss +=
            sample_loss_and_gradient(weights, spec, dataset.features[idx],
                                     dataset.labels[idx], grad, scratch);
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("training loss is not finite", epoch);
      }
      epoch_loss_sum += batch_loss;
      const double scale = 1.0 / static_cast<double>(bsize);

      if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t p = trainable_from; p < params; ++p) {
          weights.values[p] -= cfg.learning_rate * grad[p] * scale;
        }
      } else {
        adam.t += 1;
        const double bc1 =
            1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
        const double bc2 =
            1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
        for (std::size_t p = trainable_from; p < params; ++p) {
          const double g = grad[p] * scale;
          adam.m[p] = cfg.beta1 * adam.m[p] + (1.0 - cfg.beta1) * g;
          adam.v[p] = cfg.beta2 * adam.v[p] + (1.0 - cfg.beta2) * g * g;
          const double mhat = adam.m[p] / bc1;
          const double vhat = adam.v[p] / bc2;
          weights.values[p] -=
              cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
      }
    }
    final_epoch_loss = epoch_loss_sum / static_cast<double>(n);
    if (!std::isfinite(final_epoch_loss)) {
      throw DivergenceError("epoch mean loss is not finite", epoch);
    }
  }
  result.final_epoch_loss = final_epoch_loss;
  return result;
}

EvalResult evaluate(const WeightVector& w, const MlpSpec& spec,
                    const data::LabeledDataset& dataset) {
  spec.validate();
  if (!w.matches(spec)) throw ShapeError("weights do not match the mlp spec");
  if (dataset.size() == 0) throw DataError("cannot evaluate an empty dataset");
  const std::size_t layers = spec.num_layers();
  std::vector<std::vector<double>> z(layers), a(layers + 1);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    forward_pass(w, spec, dataset.features[i], z, a);
    const auto& probs = a[layers];
    const auto label = static_cast<std::size_t>(dataset.labels[i]);
    loss_sum += -std::log(std::max(probs[label], kProbFloor));
    const std::size_t pred = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (pred == label) ++correct;
  }
  const double n = static_cast<double>(dataset.size());
  return EvalResult{loss_sum / n, static_cast<double>(correct) / n};
}

namespace {

void put_u32le(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const WeightVector& w, const std::string& path) {
  w.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write("FMW1", 4);
  const unsigned char version = 1;
  out.write(reinterpret_cast<const char*>(&version), 1);
  put_u32le(out, static_cast<std::uint32_t>(w.shapes.size()));
  for (const auto& s : w.shapes) {
    put_u32le(out, s.rows);
    put_u32le(out, s.cols);
  }
  for (const double v : w.values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
  }
  if (!out) throw DataError("write failed for checkpoint: " + path);
}

WeightVector load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "FMW1", 4) != 0) {
    throw ParseError("not a checkpoint file (bad magic): " + path);
  }
  unsigned char version = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  if (!in || version != 1) {
    throw ParseError("unsupported checkpoint version in " + path);
  }
  const std::uint32_t layers = get_u32le(in);
  if (!in || layers == 0 || layers > 1024) {
    throw ParseError("implausible layer count in " + path);
  }
  WeightVector w;
  w.shapes.resize(layers);
  std::size_t total = 0;
  for (auto& s : w.shapes) {
    s.rows = get_u32le(in);
    s.cols = get_u32le(in);
    total += s.param_count();
  }
  if (!in) throw ParseError("truncated checkpoint header in " + path);
  w.values.resize(total);
  for (auto& v : w.values) {
    const std::uint32_t bits = get_u32le(in);
    float f = 0.0f;
    std::memcpy(&f, &bits, 4);
    v = static_cast<double>(f);
  }
  if (!in) throw ParseError("truncated checkpoint payload in " + path);
  w.validate();
  return w;
}

}  // namespace fedfuse::nn

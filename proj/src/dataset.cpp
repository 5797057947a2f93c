#include "fedfuse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedfuse/errors.hpp"
#include "fedfuse/rng.hpp"

namespace fedfuse::data {

namespace {

constexpr std::uint64_t kCenterTag = 0x11;
constexpr std::uint64_t kSampleTag = 0x12;
constexpr std::uint64_t kNoiseTag = 0x13;
constexpr std::uint64_t kSplitTag = 0x21;
constexpr std::uint64_t kPartShuffleTag = 0x31;
constexpr std::uint64_t kPartDirichletTag = 0x32;

constexpr double kCenterRange = 3.0;

/// Largest-remainder apportionment of n items over the given fractions.
std::vector<std::size_t> apportion(std::size_t n,
                                   const std::vector<double>& fractions) {
  const std::size_t parts = fractions.size();
  std::vector<std::size_t> out(parts, 0);
  std::vector<std::pair<double, std::size_t>> remainders(parts);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const double exact = static_cast<double>(n) * fractions[i];
    out[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = {exact - std::floor(exact), i};
    assigned += out[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    out[remainders[i % parts].second] += 1;
  }
  return out;
}

}  // namespace

LabeledDataset LabeledDataset::subset(
    const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.class_names = class_names;
  out.features.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (const std::size_t i : indices) {
    out.features.push_back(features[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> LabeledDataset::label_histogram() const {
  std::vector<std::size_t> hist(num_classes(), 0);
  for (const int y : labels) hist[static_cast<std::size_t>(y)] += 1;
  return hist;
}

void LabeledDataset::validate() const {
  if (features.size() != labels.size()) {
    throw DataError("features and labels differ in length");
  }
  const std::size_t d = dim();
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) {
      throw DataError("non-uniform feature dimension at sample " +
                      std::to_string(i));
    }
    if (labels[i] < 0 ||
        static_cast<std::size_t>(labels[i]) >= num_classes()) {
      throw DataError("label out of range at sample " + std::to_string(i));
    }
  }
}

LabeledDataset generate_synthetic(std::size_t classes, std::size_t dim,
                                  std::size_t samples_per_class,
                                  double cluster_spread, double label_noise,
                                  std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (dim < 2) throw ConfigError("synthetic data needs dim >= 2");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (!(cluster_spread > 0.0)) throw ConfigError("cluster_spread must be > 0");
  if (!(label_noise >= 0.0 && label_noise < 0.5)) {
    throw ConfigError("label_noise must lie in [0, 0.5)");
  }

  LabeledDataset ds;
  ds.class_names.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    ds.class_names.push_back("class_" + std::to_string(c));
  }

  std::vector<std::vector<double>> centers(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    rng::Stream s(rng::derive(seed, kCenterTag, c));
    centers[c].resize(dim);
    for (auto& v : centers[c]) v = s.next_uniform(-kCenterRange, kCenterRange);
  }

  ds.features.reserve(classes * samples_per_class);
  ds.labels.reserve(classes * samples_per_class);
  for (std::size_t c = 0; c < classes; ++c) {
    rng::Stream s(rng::derive(seed, kSampleTag, c));
    for (std::size_t j = 0; j < samples_per_class; ++j) {
      std::vector<double> x(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        x[k] = centers[c][k] + cluster_spread * s.next_normal();
      }
      ds.features.push_back(std::move(x));
      ds.labels.push_back(static_cast<int>(c));
    }
  }

  if (label_noise > 0.0) {
    // Flips are reassigned uniformly among the *other* classes, so the
    // measured flip fraction matches label_noise.
    rng::Stream s(rng::derive(seed, kNoiseTag));
    for (auto& y : ds.labels) {
      if (s.next_double() < label_noise) {
        const auto shift = 1 + s.next_below(classes - 1);
        y = static_cast<int>((static_cast<std::size_t>(y) + shift) % classes);
      }
    }
  }
  return ds;
}

SplitResult split_train_val_test(const LabeledDataset& ds,
                                 std::array<double, 3> fractions,
                                 std::uint64_t seed) {
  double fsum = 0.0;
  for (const double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    fsum += f;
  }
  if (std::abs(fsum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  ds.validate();
  const std::size_t n = ds.size();
  if (n == 0) throw DataError("cannot split an empty dataset");
  const std::vector<double> fr(fractions.begin(), fractions.end());

  const std::size_t classes = ds.num_classes();
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < n; ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (!by_class[c].empty() && by_class[c].size() < 3) {
      throw DataError("class " + std::to_string(c) +
                      " has fewer samples than splits");
    }
  }

  // Per-class largest-remainder allocation, then a correction pass so the
  // three split sizes match the apportionment of the full dataset while each
  // class stays within one sample of its proportional share.
  const std::vector<std::size_t> target = apportion(n, fr);
  std::vector<std::array<std::size_t, 3>> alloc(classes, {0, 0, 0});
  std::array<std::size_t, 3> totals{0, 0, 0};
  for (std::size_t c = 0; c < classes; ++c) {
    const auto a = apportion(by_class[c].size(), fr);
    for (std::size_t s = 0; s < 3; ++s) {
      alloc[c][s] = a[s];
      totals[s] += a[s];
    }
  }
  auto deviation = [&](std::size_t c, std::size_t s) {
    return static_cast<double>(alloc[c][s]) -
           static_cast<double>(by_class[c].size()) * fr[s];
  };
  for (;;) {
    std::size_t over = 3;
    std::size_t under = 3;
    for (std::size_t s = 0; s < 3; ++s) {
      if (totals[s] > target[s]) over = s;
      if (totals[s] < target[s]) under = s;
    }
    if (over == 3 || under == 3) break;
    std::size_t best = classes;
    double best_score = -1e300;
    for (std::size_t c = 0; c < classes; ++c) {
      if (alloc[c][over] == 0) continue;
      const double score = deviation(c, over) - deviation(c, under);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    alloc[best][over] -= 1;
    alloc[best][under] += 1;
    totals[over] -= 1;
    totals[under] += 1;
  }

  std::array<std::vector<std::size_t>, 3> split_indices;
  for (std::size_t c = 0; c < classes; ++c) {
    auto pool = by_class[c];
    rng::Stream s(rng::derive(seed, kSplitTag, c));
    s.shuffle(pool);
    std::size_t cursor = 0;
    for (std::size_t part = 0; part < 3; ++part) {
      for (std::size_t k = 0; k < alloc[c][part]; ++k) {
        split_indices[part].push_back(pool[cursor++]);
      }
    }
  }
  for (auto& idx : split_indices) std::sort(idx.begin(), idx.end());

  return SplitResult{ds.subset(split_indices[0]), ds.subset(split_indices[1]),
                     ds.subset(split_indices[2])};
}

std::vector<LabeledDataset> partition_clients(const LabeledDataset& ds,
                                              const PartitionPlan& plan) {
  ds.validate();
  const std::size_t n = ds.size();
  const std::size_t k = plan.clients;
  if (k < 1) throw ConfigError("partition needs at least one client");
  if (n < k) throw ConfigError("dataset smaller than the client count");
  if (plan.scheme == PartitionPlan::Scheme::dirichlet && !(plan.alpha > 0.0)) {
    throw ConfigError("dirichlet alpha must be > 0");
  }

  std::vector<std::vector<std::size_t>> assigned(k);

  if (plan.scheme == PartitionPlan::Scheme::iid) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::Stream s(rng::derive(plan.seed, kPartShuffleTag));
    s.shuffle(order);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t take = base + (c < extra ? 1 : 0);
      assigned[c].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                         order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
      cursor += take;
    }
  } else {
    const std::size_t classes = ds.num_classes();
    std::vector<std::vector<double>> proportions(k);
    for (std::size_t c = 0; c < k; ++c) {
      rng::Stream s(rng::derive(plan.seed, kPartDirichletTag, c));
      proportions[c] = s.next_dirichlet(plan.alpha, classes);
    }
    for (std::size_t cls = 0; cls < classes; ++cls) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(ds.labels[i]) == cls) pool.push_back(i);
      }
      if (pool.empty()) continue;
      rng::Stream s(rng::derive(plan.seed, kPartDirichletTag, 0xFFu, cls));
      s.shuffle(pool);
      std::vector<double> weights(k);
      double wsum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        weights[c] = proportions[c][cls];
        wsum += weights[c];
      }
      for (auto& w : weights) w /= wsum;
      const auto counts = apportion(pool.size(), weights);
      std::size_t cursor = 0;
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t t = 0; t < counts[c]; ++t) {
          assigned[c].push_back(pool[cursor++]);
        }
      }
    }
    // d_k >= 1 is required downstream; top up empty clients from the largest.
    for (std::size_t c = 0; c < k; ++c) {
      if (!assigned[c].empty()) continue;
      std::size_t donor = 0;
      for (std::size_t d = 1; d < k; ++d) {
        if (assigned[d].size() > assigned[donor].size()) donor = d;
      }
      if (assigned[donor].size() <= 1) {
        throw ConfigError("dirichlet partition infeasible: not enough samples");
      }
      assigned[c].push_back(assigned[donor].back());
      assigned[donor].pop_back();
    }
  }

  std::vector<LabeledDataset> out;
  out.reserve(k);
  for (auto& idx : assigned) {
    std::sort(idx.begin(), idx.end());
    out.push_back(ds.subset(idx));
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_label(const std::string& s, long& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

LabeledDataset load_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file: " + path);

  LabeledDataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_fields = 0;
  long max_label = -1;
  bool first_content_line = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (first_content_line) {
      first_content_line = false;
      // Header detection: a line whose fields are not all numeric.
      bool numeric = true;
      double tmp = 0.0;
      for (const auto& f : fields) {
        if (!parse_double(f, tmp)) {
          numeric = false;
          break;
        }
      }
      if (!numeric) continue;  // header line, skip
    }
    if (fields.size() < 2) {
      throw ParseError("expected a label and at least one feature", line_no);
    }
    if (expected_fields == 0) {
      expected_fields = fields.size();
    } else if (fields.size() != expected_fields) {
      throw ParseError("expected " + std::to_string(expected_fields) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    long label = 0;
    if (!parse_label(fields[0], label) || label < 0) {
      throw ParseError("invalid label '" + fields[0] + "'", line_no);
    }
    std::vector<double> x(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!parse_double(fields[i], x[i - 1])) {
        throw ParseError("non-numeric feature '" + fields[i] + "'", line_no);
      }
    }
    ds.features.push_back(std::move(x));
    ds.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, label);
  }
  if (ds.features.empty()) throw DataError("feature file holds no samples: " + path);
  for (long c = 0; c <= max_label; ++c) {
    ds.class_names.push_back("class_" + std::to_string(c));
  }
  ds.validate();
  return ds;
}

void save_feature_file(const LabeledDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature file: " + path);
  out << "label";
  for (std::size_t i = 0; i < ds.dim(); ++i) out << ",f" << i;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (const double v : ds.features[i]) {
      // Values are quantized to float32 (matching the checkpoint payload)
      // but printed with enough digits that parsing them back as double
      // reproduces the quantized value exactly.
      std::snprintf(buf, sizeof(buf), "%.17g",
                    static_cast<double>(static_cast<float>(v)));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace fedfuse::data

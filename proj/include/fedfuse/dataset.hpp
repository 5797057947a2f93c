#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fedfuse::data {

/// Feature vectors with integer class labels. Immutable by convention once
/// built; all generators and splitters return fresh copies.
struct LabeledDataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features[0].size(); }
  std::size_t num_classes() const { return class_names.size(); }

  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  std::vector<std::size_t> label_histogram() const;
  void validate() const;
};

/// Gaussian clusters at seeded random centers, one cluster per class, with a
/// fraction of labels flipped to a different class.
LabeledDataset generate_synthetic(std::size_t classes, std::size_t dim,
                                  std::size_t samples_per_class,
                                  double cluster_spread, double label_noise,
                                  std::uint64_t seed);

struct SplitResult {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Stratified three-way split. Split sizes follow the largest-remainder
/// apportionment of the full dataset; per-class counts stay within one
/// sample of the class's proportional share.
SplitResult split_train_val_test(const LabeledDataset& ds,
                                 std::array<double, 3> fractions,
                                 std::uint64_t seed);

struct PartitionPlan {
  enum class Scheme { iid, dirichlet };
  Scheme scheme = Scheme::iid;
  double alpha = 1.0;  // dirichlet concentration
  std::size_t clients = 1;
  std::uint64_t seed = 0;
};

/// Disjoint cover of the dataset across clients. Every client receives at
/// least one sample; within a client, the original sample order is kept.
std::vector<LabeledDataset> partition_clients(const LabeledDataset& ds,
                                              const PartitionPlan& plan);

/// Line-oriented text: comma-separated, first field the integer label, then
/// a fixed number of features. An optional header line is auto-detected.
LabeledDataset load_feature_file(const std::string& path);
void save_feature_file(const LabeledDataset& ds, const std::string& path);

}  // namespace fedfuse::data

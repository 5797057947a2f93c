#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedfuse/federation.hpp"

namespace fedfuse {

struct SyntheticParams {
  std::size_t classes = 3;
  std::size_t dim = 16;
  std::size_t samples_per_class = 500;
  double cluster_spread = 1.0;
  double label_noise = 0.0;
  std::uint64_t seed = 1;
};

struct DatasetSection {
  std::optional<SyntheticParams> synthetic;
  std::string feature_file;  // used when synthetic is absent
  std::array<double, 3> split{0.7, 0.2, 0.1};
  std::uint64_t split_seed = 5;
};

struct TransferSection {
  bool enabled = false;
  std::size_t head_start = 1;
  std::size_t epochs = 20;
  std::optional<SyntheticParams> source;
  std::string source_feature_file;
};

struct FusionSection {
  bool enabled = false;
  std::vector<std::string> models;  // defaults to all federation models
};

struct OutputSection {
  std::string dir = "out";
  // "final", "none", or a positive round interval.
  std::string checkpoint_cadence = "final";
  std::size_t cadence_interval() const;  // 0 when not interval-based
};

/// One experiment: dataset construction, federation settings, optional
/// transfer initialization and fusion, and output placement.
struct ExperimentConfig {
  DatasetSection dataset;
  fed::FederationConfig federation;
  TransferSection transfer;
  FusionSection fusion;
  OutputSection output;

  static ExperimentConfig load_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);

  /// Full echo with every default filled in; stable key order and layout,
  /// suitable for byte-reproducible reports.
  std::string echo_json() const;

  void validate() const;
};

}  // namespace fedfuse

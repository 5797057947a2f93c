#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fedfuse::lat {

/// Times are integral microseconds internally so stage-sum identities hold
/// exactly; sizes are Mbits and bandwidths Mbit/s.
using Micros = std::int64_t;

inline Micros ms_to_us(double ms) {
  return static_cast<Micros>(std::llround(ms * 1000.0));
}
inline double us_to_ms(Micros us) { return static_cast<double>(us) / 1000.0; }

struct Placement {
  enum class Kind { edge, cloud, gateway };
  Kind kind = Kind::cloud;
  std::uint32_t site = 0;  // meaningful for edge only

  static Placement parse(const std::string& text);
  std::string str() const;
  bool operator==(const Placement&) const = default;
  bool operator<(const Placement& o) const {
    return kind != o.kind ? kind < o.kind : site < o.site;
  }
};

enum class Stage { preprocessing, processing, fusion, other };

Stage stage_from_string(const std::string& text);
std::string stage_name(Stage s);

struct MicroserviceNode {
  std::string name;
  Placement placement;
  Micros exec_us = 0;
  Stage stage = Stage::other;
};

/// Directed bandwidths between placements plus the designated edge-to-cloud
/// relay ("gateway") endpoint.
class LinkTable {
 public:
  void set_bandwidth(Placement from, Placement to, double mbits_per_s);
  double bandwidth(const Placement& from, const Placement& to) const;

 private:
  std::map<std::pair<Placement, Placement>, double> bw_;
};

struct PipelineSpec {
  std::vector<MicroserviceNode> nodes;
  std::vector<double> transfer_mbits;  // one entry per hop, nodes.size() - 1
  bool parallel_processing = false;    // processing stage folds by max
  void validate() const;
};

/// Transfer duration between two services: zero when co-located, two hops
/// through the gateway for edge-to-cloud, direct link otherwise.
Micros trans_time_us(const MicroserviceNode& from, const MicroserviceNode& to,
                     double size_mbits, const LinkTable& links);

/// Transfer from the predecessor plus the node's own execution time.
Micros response_time_us(const MicroserviceNode& node,
                        const MicroserviceNode& predecessor, double size_mbits,
                        const LinkTable& links);

struct NodeTiming {
  std::string name;
  Stage stage = Stage::other;
  Micros transfer_us = 0;
  Micros exec_us = 0;
  Micros response_us = 0;
};

struct PipelineTiming {
  std::vector<NodeTiming> nodes;
  std::array<Micros, 4> stage_us{};  // indexed by Stage
  Micros total_us = 0;
};

PipelineTiming total_time(const PipelineSpec& pipeline, const LinkTable& links);

struct PipelineFile {
  PipelineSpec pipeline;
  LinkTable links;
};

/// JSON file with a node list (name, placement, exec_ms, stage), per-hop
/// transfer sizes, and a link list (from, to, bw_mbits).
PipelineFile load_pipeline_file(const std::string& path);

}  // namespace fedfuse::lat

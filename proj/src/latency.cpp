#include "fedfuse/latency.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "fedfuse/errors.hpp"
#include "json.hpp"

namespace fedfuse::lat {

Placement Placement::parse(const std::string& text) {
  if (text == "cloud") return Placement{Kind::cloud, 0};
  if (text == "gateway") return Placement{Kind::gateway, 0};
  if (text.rfind("edge:", 0) == 0) {
    const std::string id = text.substr(5);
    std::uint32_t site = 0;
    const auto res = std::from_chars(id.data(), id.data() + id.size(), site);
    if (res.ec != std::errc() || res.ptr != id.data() + id.size()) {
      throw ConfigError("bad edge site in placement '" + text + "'");
    }
    return Placement{Kind::edge, site};
  }
  throw ConfigError("unknown placement '" + text +
                    "' (expected cloud, gateway, or edge:<site>)");
}

std::string Placement::str() const {
  switch (kind) {
    case Kind::cloud:
      return "cloud";
    case Kind::gateway:
      return "gateway";
    case Kind::edge:
      return "edge:" + std::to_string(site);
  }
  return "?";
}

Stage stage_from_string(const std::string& text) {
  if (text == "preprocessing") return Stage::preprocessing;
  if (text == "processing") return Stage::processing;
  if (text == "fusion") return Stage::fusion;
  if (text == "other") return Stage::other;
  throw ConfigError("unknown stage '" + text + "'");
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::preprocessing:
      return "preprocessing";
    case Stage::processing:
      return "processing";
    case Stage::fusion:
      return "fusion";
    case Stage::other:
      return "other";
  }
  return "?";
}

void LinkTable::set_bandwidth(Placement from, Placement to,
                              double mbits_per_s) {
  if (!(mbits_per_s > 0.0)) {
    throw ConfigError("bandwidth must be > 0 for link " + from.str() + " -> " +
                      to.str());
  }
  bw_[{from, to}] = mbits_per_s;
}

double LinkTable::bandwidth(const Placement& from, const Placement& to) const {
  const auto it = bw_.find({from, to});
  if (it == bw_.end()) {
    throw ConfigError("no bandwidth entry for link " + from.str() + " -> " +
                      to.str());
  }
  return it->second;
}

void PipelineSpec::validate() const {
  if (nodes.empty()) throw ConfigError("pipeline needs at least one node");
  if (transfer_mbits.size() + 1 != nodes.size()) {
    throw ConfigError("pipeline needs one transfer size per hop (" +
                      std::to_string(nodes.size() - 1) + " expected)");
  }
  for (const auto& node : nodes) {
    if (node.exec_us < 0) {
      throw ConfigError("negative exec time on node " + node.name);
    }
  }
  for (const double s : transfer_mbits) {
    if (s < 0.0) throw ConfigError("transfer sizes must be >= 0");
  }
}

namespace {

Micros link_us(double size_mbits, double bw) {
  return static_cast<Micros>(std::llround(size_mbits / bw * 1e6));
}

constexpr Placement kGateway{Placement::Kind::gateway, 0};
constexpr Placement kCloud{Placement::Kind::cloud, 0};

}  // namespace

Micros trans_time_us(const MicroserviceNode& from, const MicroserviceNode& to,
                     double size_mbits, const LinkTable& links) {
  if (size_mbits < 0.0) throw ConfigError("transfer size must be >= 0");
  if (from.placement == to.placement) return 0;
  if (from.placement.kind == Placement::Kind::edge &&
      to.placement.kind == Placement::Kind::cloud) {
    // Relayed through the gateway: edge uplink, then gateway-to-cloud.
    const double up = links.bandwidth(from.placement, kGateway);
    const double down = links.bandwidth(kGateway, kCloud);
    return link_us(size_mbits, up) + link_us(size_mbits, down);
  }
  return link_us(size_mbits, links.bandwidth(from.placement, to.placement));
}

Micros response_time_us(const MicroserviceNode& node,
                        const MicroserviceNode& predecessor, double size_mbits,
                        const LinkTable& links) {
  return trans_time_us(predecessor, node, size_mbits, links) + node.exec_us;
}

PipelineTiming total_time(const PipelineSpec& pipeline,
                          const LinkTable& links) {
  pipeline.validate();
  PipelineTiming timing;
  timing.nodes.reserve(pipeline.nodes.size());

  Micros parallel_processing_max = 0;
  for (std::size_t i = 0; i < pipeline.nodes.size(); ++i) {
    const auto& node = pipeline.nodes[i];
    NodeTiming nt;
    nt.name = node.name;
    nt.stage = node.stage;
    nt.exec_us = node.exec_us;
    nt.transfer_us =
        i == 0 ? 0
               : trans_time_us(pipeline.nodes[i - 1], node,
                               pipeline.transfer_mbits[i - 1], links);
    nt.response_us = nt.transfer_us + nt.exec_us;

    const auto stage_idx = static_cast<std::size_t>(node.stage);
    if (pipeline.parallel_processing && node.stage == Stage::processing) {
      parallel_processing_max =
          std::max(parallel_processing_max, nt.response_us);
    } else {
      timing.stage_us[stage_idx] += nt.response_us;
    }
    timing.nodes.push_back(std::move(nt));
  }
  if (pipeline.parallel_processing) {
    timing.stage_us[static_cast<std::size_t>(Stage::processing)] +=
        parallel_processing_max;
  }
  timing.total_us = 0;
  for (const Micros s : timing.stage_us) timing.total_us += s;
  return timing;
}

PipelineFile load_pipeline_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pipeline file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid pipeline JSON: ") + e.what());
  }

  PipelineFile file;
  try {
    for (const auto& jn : doc.at("nodes")) {
      MicroserviceNode node;
      node.name = jn.at("name").get<std::string>();
      node.placement = Placement::parse(jn.at("placement").get<std::string>());
      node.exec_us = ms_to_us(jn.at("exec_ms").get<double>());
      node.stage = stage_from_string(jn.value("stage", "other"));
      file.pipeline.nodes.push_back(std::move(node));
    }
    if (doc.contains("transfers_mbits")) {
      file.pipeline.transfer_mbits =
          doc.at("transfers_mbits").get<std::vector<double>>();
    } else {
      file.pipeline.transfer_mbits.assign(
          file.pipeline.nodes.empty() ? 0 : file.pipeline.nodes.size() - 1,
          0.0);
    }
    file.pipeline.parallel_processing = doc.value("parallel_processing", false);
    if (doc.contains("links")) {
      for (const auto& jl : doc.at("links")) {
        file.links.set_bandwidth(
            Placement::parse(jl.at("from").get<std::string>()),
            Placement::parse(jl.at("to").get<std::string>()),
            jl.at("bw_mbits").get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid pipeline description: ") + e.what());
  }
  file.pipeline.validate();
  return file;
}

}  // namespace fedfuse::lat

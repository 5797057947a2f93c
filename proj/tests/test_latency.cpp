#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fedfuse/errors.hpp"
#include "fedfuse/latency.hpp"
#include "fedfuse/rng.hpp"

using namespace fedfuse;

namespace {

lat::MicroserviceNode node(const std::string& name, const std::string& place,
                           double exec_ms, lat::Stage stage = lat::Stage::other) {
  return lat::MicroserviceNode{name, lat::Placement::parse(place),
                               lat::ms_to_us(exec_ms), stage};
}

}  // namespace

TEST_SUITE("latency") {
  TEST_CASE("placement parsing") {
    CHECK(lat::Placement::parse("cloud").kind == lat::Placement::Kind::cloud);
    CHECK(lat::Placement::parse("gateway").kind == lat::Placement::Kind::gateway);
    const auto edge = lat::Placement::parse("edge:3");
    CHECK(edge.kind == lat::Placement::Kind::edge);
    CHECK(edge.site == 3);
    CHECK(edge.str() == "edge:3");
    CHECK_THROWS_AS(lat::Placement::parse("fog"), ConfigError);
    CHECK_THROWS_AS(lat::Placement::parse("edge:x"), ConfigError);
  }

  TEST_CASE("co-located transfers cost exactly zero") {
    lat::LinkTable links;
    const auto a = node("a", "edge:0", 1.0);
    const auto b = node("b", "edge:0", 2.0);
    CHECK(lat::trans_time_us(a, b, 123.0, links) == 0);
  }

  TEST_CASE("direct transfer divides size by bandwidth") {
    lat::LinkTable links;
    links.set_bandwidth(lat::Placement::parse("cloud"),
                        lat::Placement::parse("edge:0"), 5.0);
    const auto from = node("c", "cloud", 0.0);
    const auto to = node("e", "edge:0", 0.0);
    // 10 Mbit over 5 Mbit/s = 2 s
    CHECK(lat::trans_time_us(from, to, 10.0, links) == 2'000'000);
    CHECK(lat::us_to_ms(lat::trans_time_us(from, to, 10.0, links)) == 2000.0);
  }

  TEST_CASE("edge to cloud routes through the gateway") {
    lat::LinkTable links;
    links.set_bandwidth(lat::Placement::parse("edge:0"),
                        lat::Placement::parse("gateway"), 4.0);
    links.set_bandwidth(lat::Placement::parse("gateway"),
                        lat::Placement::parse("cloud"), 8.0);
    const auto from = node("e", "edge:0", 0.0);
    const auto to = node("c", "cloud", 0.0);
    // 8/4 s + 8/8 s = 3000 ms
    CHECK(lat::us_to_ms(lat::trans_time_us(from, to, 8.0, links)) == 3000.0);
  }

  TEST_CASE("missing links are configuration errors naming the link") {
    lat::LinkTable links;
    const auto from = node("e", "edge:1", 0.0);
    const auto to = node("f", "edge:2", 0.0);
    try {
      lat::trans_time_us(from, to, 1.0, links);
      FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("edge:1") != std::string::npos);
      CHECK(std::string(e.what()).find("edge:2") != std::string::npos);
    }
  }

  TEST_CASE("response time adds transfer and execution") {
    lat::LinkTable links;
    links.set_bandwidth(lat::Placement::parse("cloud"),
                        lat::Placement::parse("edge:0"), 5.0);
    const auto pred = node("p", "cloud", 50.0);
    const auto n = node("n", "edge:0", 100.0);
    CHECK(lat::us_to_ms(lat::response_time_us(n, pred, 10.0, links)) == 2100.0);

    const auto co = node("q", "cloud", 5.0);
    CHECK(lat::us_to_ms(lat::response_time_us(co, pred, 10.0, links)) == 5.0);

    const auto idle = node("r", "cloud", 0.0);
    CHECK(lat::response_time_us(idle, pred, 0.0, links) == 0);
  }

  TEST_CASE("single node pipeline") {
    lat::PipelineSpec pipe;
    pipe.nodes.push_back(node("only", "cloud", 7.0));
    lat::LinkTable links;
    const auto timing = lat::total_time(pipe, links);
    CHECK(lat::us_to_ms(timing.total_us) == 7.0);
  }

  TEST_CASE("three-stage co-located chain and the stage identity") {
    lat::PipelineSpec pipe;
    pipe.nodes.push_back(node("pre", "edge:0", 3000.0, lat::Stage::preprocessing));
    pipe.nodes.push_back(node("analytics", "edge:0", 9000.0, lat::Stage::processing));
    pipe.nodes.push_back(node("fuse", "edge:0", 400.0, lat::Stage::fusion));
    pipe.transfer_mbits = {1.0, 1.0};
    lat::LinkTable links;
    const auto timing = lat::total_time(pipe, links);
    CHECK(lat::us_to_ms(timing.total_us) == 12400.0);
    CHECK(lat::us_to_ms(timing.stage_us[0]) == 3000.0);
    CHECK(lat::us_to_ms(timing.stage_us[1]) == 9000.0);
    CHECK(lat::us_to_ms(timing.stage_us[2]) == 400.0);

    lat::Micros stage_sum = 0;
    for (const auto s : timing.stage_us) stage_sum += s;
    CHECK(stage_sum == timing.total_us);  // exact, integral microseconds
  }

  TEST_CASE("concatenation additivity") {
    lat::LinkTable links;
    links.set_bandwidth(lat::Placement::parse("edge:0"),
                        lat::Placement::parse("gateway"), 2.0);
    links.set_bandwidth(lat::Placement::parse("gateway"),
                        lat::Placement::parse("cloud"), 4.0);

    lat::PipelineSpec left;
    left.nodes = {node("a", "edge:0", 10.0), node("b", "edge:0", 20.0)};
    left.transfer_mbits = {1.0};

    lat::PipelineSpec right;
    right.nodes = {node("c", "cloud", 30.0), node("d", "cloud", 40.0)};
    right.transfer_mbits = {2.0};

    lat::PipelineSpec whole;
    whole.nodes = {left.nodes[0], left.nodes[1], right.nodes[0], right.nodes[1]};
    whole.transfer_mbits = {1.0, 5.0, 2.0};

    const auto junction = lat::trans_time_us(left.nodes[1], right.nodes[0], 5.0, links);
    CHECK(lat::total_time(whole, links).total_us ==
          lat::total_time(left, links).total_us +
              lat::total_time(right, links).total_us + junction);
  }

  TEST_CASE("monotonicity in exec, size, and bandwidth") {
    rng::Stream s(40);
    for (int trial = 0; trial < 100; ++trial) {
      lat::LinkTable links;
      const double bw_up = 0.5 + s.next_double() * 9.5;
      const double bw_down = 0.5 + s.next_double() * 9.5;
      links.set_bandwidth(lat::Placement::parse("edge:0"),
                          lat::Placement::parse("gateway"), bw_up);
      links.set_bandwidth(lat::Placement::parse("gateway"),
                          lat::Placement::parse("cloud"), bw_down);

      lat::PipelineSpec pipe;
      const double e0 = s.next_double() * 50.0;
      const double e1 = s.next_double() * 50.0;
      const double size = s.next_double() * 20.0;
      pipe.nodes = {node("a", "edge:0", e0, lat::Stage::preprocessing),
                    node("b", "cloud", e1, lat::Stage::processing)};
      pipe.transfer_mbits = {size};
      const auto base = lat::total_time(pipe, links).total_us;

      auto bigger_exec = pipe;
      bigger_exec.nodes[1].exec_us += lat::ms_to_us(5.0);
      CHECK(lat::total_time(bigger_exec, links).total_us >= base);

      auto bigger_size = pipe;
      bigger_size.transfer_mbits[0] += 3.0;
      CHECK(lat::total_time(bigger_size, links).total_us >= base);

      lat::LinkTable slower;
      slower.set_bandwidth(lat::Placement::parse("edge:0"),
                           lat::Placement::parse("gateway"), bw_up * 0.5);
      slower.set_bandwidth(lat::Placement::parse("gateway"),
                           lat::Placement::parse("cloud"), bw_down);
      CHECK(lat::total_time(pipe, slower).total_us >= base);
    }
  }

  TEST_CASE("parallel processing folds the analytics stage by max") {
    lat::PipelineSpec pipe;
    pipe.nodes = {node("pre", "cloud", 10.0, lat::Stage::preprocessing),
                  node("m1", "cloud", 30.0, lat::Stage::processing),
                  node("m2", "cloud", 50.0, lat::Stage::processing),
                  node("m3", "cloud", 20.0, lat::Stage::processing),
                  node("fuse", "cloud", 5.0, lat::Stage::fusion)};
    pipe.transfer_mbits = {0.0, 0.0, 0.0, 0.0};
    lat::LinkTable links;

    const auto sequential = lat::total_time(pipe, links);
    CHECK(lat::us_to_ms(sequential.total_us) == 115.0);

    pipe.parallel_processing = true;
    const auto parallel = lat::total_time(pipe, links);
    CHECK(lat::us_to_ms(parallel.stage_us[1]) == 50.0);
    CHECK(lat::us_to_ms(parallel.total_us) == 65.0);
  }

  TEST_CASE("unit discipline: 1 Mbit over 1 Mbit/s is 1000 ms") {
    lat::LinkTable links;
    links.set_bandwidth(lat::Placement::parse("edge:0"),
                        lat::Placement::parse("edge:1"), 1.0);
    const auto a = node("a", "edge:0", 0.0);
    const auto b = node("b", "edge:1", 0.0);
    CHECK(lat::us_to_ms(lat::trans_time_us(a, b, 1.0, links)) == 1000.0);
  }

  TEST_CASE("pipeline file loads and validates") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "fedfuse_pipe.json";
    {
      std::ofstream out(path);
      out << R"({
        "nodes": [
          {"name": "pre", "placement": "edge:0", "exec_ms": 3000, "stage": "preprocessing"},
          {"name": "ana", "placement": "cloud", "exec_ms": 9000, "stage": "processing"},
          {"name": "fus", "placement": "cloud", "exec_ms": 400, "stage": "fusion"}
        ],
        "transfers_mbits": [8.0, 1.0],
        "links": [
          {"from": "edge:0", "to": "gateway", "bw_mbits": 4.0},
          {"from": "gateway", "to": "cloud", "bw_mbits": 8.0}
        ]
      })";
    }
    const auto file = lat::load_pipeline_file(path.string());
    const auto timing = lat::total_time(file.pipeline, file.links);
    CHECK(lat::us_to_ms(timing.total_us) == 3000.0 + 3000.0 + 9000.0 + 400.0);

    {
      std::ofstream out(path);
      out << "{ not json";
    }
    CHECK_THROWS_AS(lat::load_pipeline_file(path.string()), ParseError);
    fs::remove(path);
    CHECK_THROWS_AS(lat::load_pipeline_file(path.string()), DataError);
  }
}

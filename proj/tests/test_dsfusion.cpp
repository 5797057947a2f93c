#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fedfuse/dsfusion.hpp"
#include "fedfuse/errors.hpp"
#include "fedfuse/rng.hpp"
#include "oracles.hpp"

using namespace fedfuse;

namespace {

const ds::FrameOfDiscernment kAbc({"A", "B", "C"});

ds::MassFunction bayesian(const ds::FrameOfDiscernment& frame,
                          std::vector<double> probs) {
  return ds::mass_from_probs(frame, probs);
}

bool approx_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_SUITE("dsfusion") {
  TEST_CASE("mass construction validates the axioms") {
    CHECK_THROWS_AS(ds::MassFunction(kAbc, {{0u, 0.5}, {1u, 0.5}}),
                    EvidenceError);
    CHECK_THROWS_AS(ds::MassFunction(kAbc, {{1u, 0.6}}), EvidenceError);
    CHECK_THROWS_AS(ds::MassFunction(kAbc, {{1u, 1.2}, {2u, -0.2}}),
                    EvidenceError);
    CHECK_THROWS_AS(ds::MassFunction(kAbc, {{1u << 5, 1.0}}), EvidenceError);

    const ds::MassFunction ok(kAbc, {{1u, 0.25}, {6u, 0.75}, {2u, 0.0}});
    CHECK(ok.focal().size() == 2);  // the zero entry is not stored
    CHECK(ok.mass(1u) == 0.25);
    CHECK(ok.mass(2u) == 0.0);
  }

  TEST_CASE("frame validation") {
    CHECK_THROWS_AS(ds::FrameOfDiscernment({}), EvidenceError);
    CHECK_THROWS_AS(ds::FrameOfDiscernment({"A", "A"}), EvidenceError);
    CHECK_THROWS_AS(
        ds::FrameOfDiscernment(std::vector<std::string>(21, "x")),
        EvidenceError);
    CHECK(kAbc.subset_name(0b101) == "A+C");
  }

  TEST_CASE("mass_from_probs normalizes and drops dust") {
    const auto m1 = bayesian(kAbc, {0.7, 0.2, 0.1});
    CHECK(m1.mass(kAbc.singleton(0)) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(m1.mass(kAbc.singleton(1)) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m1.mass(kAbc.singleton(2)) == doctest::Approx(0.1).epsilon(1e-12));

    const ds::FrameOfDiscernment ab({"A", "B"});
    const auto m2 = bayesian(ab, {2.0, 2.0});
    CHECK(m2.mass(1u) == doctest::Approx(0.5));
    CHECK(m2.mass(2u) == doctest::Approx(0.5));

    const auto m3 = bayesian(kAbc, {1.0, 0.0, 0.0});
    CHECK(m3.focal().size() == 1);
    CHECK(m3.mass(1u) == 1.0);

    const auto m4 = bayesian(kAbc, {1.0, 1e-15, 0.0});
    CHECK(m4.focal().size() == 1);  // dust dropped, mass renormalized
    CHECK(m4.mass(1u) == 1.0);

    CHECK_THROWS_AS(bayesian(kAbc, {0.0, 0.0, 0.0}), EvidenceError);
    CHECK_THROWS_AS(bayesian(kAbc, {0.5, -0.1, 0.6}), EvidenceError);
  }

  TEST_CASE("vacuous mass is the identity of combination") {
    const auto m = ds::MassFunction(
        kAbc, {{1u, 0.5}, {3u, 0.3}, {7u, 0.2}});
    const auto vac = ds::MassFunction::vacuous(kAbc);
    const auto result = ds::ds_combine(m, vac);
    CHECK(result.conflict == 0.0);
    REQUIRE(result.combined.focal().size() == m.focal().size());
    for (const auto& [subset, mass] : m.focal()) {
      CHECK(result.combined.mass(subset) == doctest::Approx(mass).epsilon(1e-15));
    }
  }

  TEST_CASE("Zadeh's paradox case") {
    const auto m1 = ds::MassFunction(kAbc, {{1u, 0.99}, {2u, 0.01}});
    const auto m2 = ds::MassFunction(kAbc, {{4u, 0.99}, {2u, 0.01}});
    const auto result = ds::ds_combine(m1, m2);
    CHECK(approx_abs(result.conflict, 0.9999, 5e-5));
    CHECK(result.combined.mass(2u) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.combined.focal().size() == 1);

    const auto decision = ds::decide_max_belief(result);
    CHECK(decision.label == "B");
    CHECK(decision.belief == doctest::Approx(1.0));
  }

  TEST_CASE("hand-evaluated two-source combination") {
    // m1: A=0.6, A+B=0.4; m2: B=0.5, A+B=0.5. The only conflicting pair is
    // (A, B) with product 0.3. Surviving products: (A, A+B)=0.30 -> A,
    // (A+B, B)=0.20 -> B, (A+B, A+B)=0.20 -> A+B.
    const ds::FrameOfDiscernment ab({"A", "B"});
    const auto m1 = ds::MassFunction(ab, {{1u, 0.6}, {3u, 0.4}});
    const auto m2 = ds::MassFunction(ab, {{2u, 0.5}, {3u, 0.5}});
    const auto result = ds::ds_combine(m1, m2);
    CHECK(result.conflict == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(result.combined.mass(1u) == doctest::Approx(0.30 / 0.7).epsilon(1e-12));
    CHECK(result.combined.mass(2u) == doctest::Approx(0.20 / 0.7).epsilon(1e-12));
    CHECK(result.combined.mass(3u) == doctest::Approx(0.20 / 0.7).epsilon(1e-12));
  }

  TEST_CASE("total conflict is an error") {
    const ds::FrameOfDiscernment ab({"A", "B"});
    const auto m1 = ds::MassFunction(ab, {{1u, 1.0}});
    const auto m2 = ds::MassFunction(ab, {{2u, 1.0}});
    CHECK_THROWS_AS(ds::ds_combine(m1, m2), TotalConflictError);

    try {
      ds::combine_all({m1, m1, m2});
      FAIL("expected total conflict");
    } catch (const TotalConflictError& e) {
      CHECK(e.step == 2);
    }
  }

  TEST_CASE("combination matches the exhaustive dense oracle") {
    rng::Stream s(2024);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + s.next_below(3);  // frames of 2..4 labels
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < n; ++i) labels.push_back(std::string(1, char('A' + i)));
      const ds::FrameOfDiscernment frame(labels);
      const auto m1 = oracles::random_dense_mass(frame, s);
      const auto m2 = oracles::random_dense_mass(frame, s);

      const auto expected =
          oracles::dense_combine(oracles::to_dense(m1), oracles::to_dense(m2));
      const auto actual = ds::ds_combine(m1, m2);
      CHECK(approx_abs(actual.conflict, expected.conflict, 1e-12));
      for (std::size_t subset = 1; subset < expected.mass.m.size(); ++subset) {
        CHECK(approx_abs(actual.combined.mass(static_cast<ds::Subset>(subset)),
                         expected.mass.m[subset], 1e-12));
      }
    }
  }

  TEST_CASE("commutativity and associativity") {
    rng::Stream s(77);
    for (int trial = 0; trial < 200; ++trial) {
      const auto m1 = oracles::random_dense_mass(kAbc, s);
      const auto m2 = oracles::random_dense_mass(kAbc, s);
      const auto m3 = oracles::random_dense_mass(kAbc, s);

      const auto ab = ds::ds_combine(m1, m2);
      const auto ba = ds::ds_combine(m2, m1);
      CHECK(approx_abs(ab.conflict, ba.conflict, 1e-12));
      for (const auto& [subset, mass] : ab.combined.focal()) {
        CHECK(approx_abs(ba.combined.mass(subset), mass, 1e-12));
      }

      const auto left = ds::ds_combine(ab.combined, m3).combined;
      const auto right = ds::ds_combine(m1, ds::ds_combine(m2, m3).combined).combined;
      for (const auto& [subset, mass] : left.focal()) {
        CHECK(approx_abs(right.mass(subset), mass, 1e-9));
      }
    }
  }

  TEST_CASE("bayesian combination reduces to the normalized product") {
    rng::Stream s(3111);
    for (int trial = 0; trial < 100; ++trial) {
      const auto m1 = oracles::random_bayesian_mass(kAbc, s);
      const auto m2 = oracles::random_bayesian_mass(kAbc, s);
      const auto result = ds::ds_combine(m1, m2);

      std::vector<double> product(3);
      double sum = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        product[i] = m1.mass(kAbc.singleton(i)) * m2.mass(kAbc.singleton(i));
        sum += product[i];
      }
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(approx_abs(result.combined.mass(kAbc.singleton(i)),
                         product[i] / sum, 1e-12));
      }
      CHECK(approx_abs(result.conflict, 1.0 - sum, 1e-12));
    }
  }

  TEST_CASE("three-source fold matches the direct triple sum") {
    rng::Stream s(555);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m1 = oracles::random_bayesian_mass(kAbc, s);
      const auto m2 = oracles::random_bayesian_mass(kAbc, s);
      const auto m3 = oracles::random_bayesian_mass(kAbc, s);
      const auto fold = ds::combine_all({m1, m2, m3});
      const auto direct = oracles::dense_combine3(
          oracles::to_dense(m1), oracles::to_dense(m2), oracles::to_dense(m3));
      for (std::size_t subset = 1; subset < direct.mass.m.size(); ++subset) {
        CHECK(approx_abs(fold.combined.mass(static_cast<ds::Subset>(subset)),
                         direct.mass.m[subset], 1e-9));
      }
      // The direct l-ary conflict is exposed separately from the cumulative
      // fold-wise value.
      CHECK(approx_abs(ds::nary_conflict({m1, m2, m3}), direct.conflict, 1e-12));
    }
  }

  TEST_CASE("combine_all base cases") {
    rng::Stream stream(1);
    const auto m = oracles::random_dense_mass(kAbc, stream);
    const auto single = ds::combine_all({m});
    CHECK(single.conflict == 0.0);
    for (const auto& [subset, mass] : m.focal()) {
      CHECK(single.combined.mass(subset) == mass);
    }

    const auto vac = ds::MassFunction::vacuous(kAbc);
    const auto three = ds::combine_all({vac, vac, vac});
    CHECK(three.conflict == 0.0);
    CHECK(three.combined.mass(kAbc.full_set()) == doctest::Approx(1.0));
    CHECK_THROWS_AS(ds::combine_all({}), EvidenceError);
  }

  TEST_CASE("belief and plausibility") {
    const auto m = bayesian(kAbc, {0.7, 0.2, 0.1});
    CHECK(ds::belief(m, kAbc.full_set()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ds::belief(m, 0u) == 0.0);
    CHECK(ds::belief(m, 0b011) == doctest::Approx(0.9).epsilon(1e-12));

    const ds::FrameOfDiscernment ab({"A", "B"});
    const auto set_mass = ds::MassFunction(ab, {{3u, 1.0}});
    CHECK(ds::belief(set_mass, 1u) == 0.0);
    CHECK(ds::plausibility(set_mass, 1u) == doctest::Approx(1.0));
    CHECK(ds::plausibility(set_mass, 0u) == doctest::Approx(0.0));
    CHECK(ds::plausibility(set_mass, ab.full_set()) == doctest::Approx(1.0));
  }

  TEST_CASE("belief bounds and monotonicity over random masses") {
    rng::Stream s(808);
    const ds::FrameOfDiscernment frame({"A", "B", "C", "D"});
    for (int trial = 0; trial < 100; ++trial) {
      const auto m = oracles::random_dense_mass(frame, s);
      for (ds::Subset a = 0; a <= frame.full_set(); ++a) {
        const double bel = ds::belief(m, a);
        const double pl = ds::plausibility(m, a);
        CHECK(bel >= -1e-12);
        CHECK(pl <= 1.0 + 1e-12);
        CHECK(bel <= pl + 1e-12);
        for (ds::Subset b = a;; b = (b + 1) | a) {  // supersets of a
          if (b > frame.full_set()) break;
          if ((b & a) == a) CHECK(ds::belief(m, b) >= bel - 1e-12);
          if (b == frame.full_set()) break;
        }
      }
      // Bayesian masses collapse the interval.
      const auto bm = oracles::random_bayesian_mass(frame, s);
      for (ds::Subset a = 0; a <= frame.full_set(); ++a) {
        CHECK(approx_abs(ds::belief(bm, a), ds::plausibility(bm, a), 1e-9));
      }
    }
  }

  TEST_CASE("max-belief decision and tie-break") {
    const auto r1 = ds::combine_all({bayesian(kAbc, {0.1, 0.8, 0.1})});
    const auto d1 = ds::decide_max_belief(r1);
    CHECK(d1.index == 1);
    CHECK(d1.belief == doctest::Approx(0.8));

    const ds::FrameOfDiscernment ab({"A", "B"});
    const auto r2 = ds::combine_all({bayesian(ab, {0.5, 0.5})});
    const auto d2 = ds::decide_max_belief(r2);
    CHECK(d2.index == 0);  // exact tie resolves to the lowest index
  }

  TEST_CASE("mass files parse and validate") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "fedfuse_mass.txt";
    {
      std::ofstream out(path);
      out << "# two sources over a three-label frame\n"
          << "frame A B C\n"
          << "mass m1 A=0.99 B=0.01\n"
          << "mass m2 C=0.99 B=0.01\n"
          << "mass m3 A+B=0.5 C=0.5\n";
    }
    const auto file = ds::load_mass_file(path.string());
    CHECK(file.frame == kAbc);
    REQUIRE(file.records.size() == 3);
    CHECK(file.records[0].source == "m1");
    CHECK(file.records[2].mass.mass(0b011) == 0.5);

    {
      std::ofstream out(path);
      out << "frame A B\nmass m1 A=0.5 Q=0.5\n";
    }
    try {
      ds::load_mass_file(path.string());
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(e.line == 2);
    }

    {
      std::ofstream out(path);
      out << "frame A B\nmass m1 A=0.5 B=0.2\n";
    }
    CHECK_THROWS_AS(ds::load_mass_file(path.string()), ParseError);
    fs::remove(path);
  }
}

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fedfuse/errors.hpp"
#include "fedfuse/metrics.hpp"
#include "fedfuse/rng.hpp"

using namespace fedfuse;

TEST_SUITE("metrics") {
  TEST_CASE("confusion matrix tallies predictions") {
    const std::vector<int> truth{0, 0, 1};
    const std::vector<int> pred{1, 0, 1};
    const auto cm = metrics::ConfusionMatrix::from_predictions(truth, pred, 2);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(1, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.total() == 3);
    CHECK(cm.trace() == 2);

    const auto perfect = metrics::ConfusionMatrix::from_predictions(
        std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2);
    CHECK(perfect.at(0, 0) == 1);
    CHECK(perfect.at(1, 1) == 1);
    CHECK(perfect.at(0, 1) == 0);

    const auto empty = metrics::ConfusionMatrix::from_predictions(
        std::vector<int>{}, std::vector<int>{}, 3);
    CHECK(empty.total() == 0);
  }

  TEST_CASE("confusion matrix rejects bad labels") {
    const std::vector<int> truth{0, 5};
    const std::vector<int> pred{0, 1};
    CHECK_THROWS_AS(metrics::ConfusionMatrix::from_predictions(truth, pred, 2),
                    DataError);
    CHECK_THROWS_AS(metrics::ConfusionMatrix::from_predictions(
                        std::vector<int>{0}, std::vector<int>{}, 2),
                    DataError);
  }

  TEST_CASE("hand-evaluated binary metrics") {
    const auto m = metrics::binary_metrics(2, 1, 1, 6);
    CHECK(m.accuracy == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.specificity == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
    // (2*6 - 1*1) / sqrt(3 * 3 * 7 * 7) = 11 / 21
    CHECK(m.mcc == doctest::Approx(11.0 / 21.0).epsilon(1e-12));
    CHECK_FALSE(m.any_degenerate());
  }

  TEST_CASE("perfect and anti-perfect classifiers hit the MCC poles") {
    const auto perfect = metrics::binary_metrics(5, 0, 0, 7);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.specificity == 1.0);
    CHECK(perfect.mcc == 1.0);

    const auto inverted = metrics::binary_metrics(0, 3, 4, 0);
    CHECK(inverted.mcc == -1.0);

    // the poles stay exact for counts whose products round in doubles
    const auto big = metrics::binary_metrics(999983, 0, 0, 999979);
    CHECK(big.mcc == 1.0);
  }

  TEST_CASE("zero denominators flag instead of NaN") {
    const auto no_positives = metrics::binary_metrics(0, 0, 0, 4);
    CHECK(no_positives.precision == 0.0);
    CHECK(no_positives.precision_degenerate);
    CHECK(no_positives.recall_degenerate);
    CHECK(no_positives.f1 == 0.0);
    CHECK(no_positives.f1_degenerate);
    CHECK(no_positives.mcc_degenerate);
    CHECK(no_positives.specificity == 1.0);
    CHECK(std::isfinite(no_positives.mcc));

    CHECK_THROWS_AS(metrics::binary_metrics(0, 0, 0, 0), DataError);
  }

  TEST_CASE("macro report unfolds into one-vs-rest tables") {
    metrics::ConfusionMatrix cm(2);
    // counts [[6,1],[1,2]]
    for (int i = 0; i < 6; ++i) cm.add(0, 0);
    cm.add(0, 1);
    cm.add(1, 0);
    for (int i = 0; i < 2; ++i) cm.add(1, 1);

    const auto report = metrics::macro_report(cm);
    const auto expected = metrics::binary_metrics(6, 1, 1, 2);
    CHECK(report.per_class[0].precision == expected.precision);
    CHECK(report.per_class[0].recall == expected.recall);
    CHECK(report.per_class[0].specificity == expected.specificity);
    CHECK(report.per_class[0].mcc == expected.mcc);
    CHECK(report.macro.accuracy == doctest::Approx(0.8));
  }

  TEST_CASE("perfect diagonal gives all ones") {
    metrics::ConfusionMatrix cm(3);
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 5; ++i) cm.add(c, c);
    }
    const auto report = metrics::macro_report(cm);
    CHECK(report.macro.accuracy == 1.0);
    CHECK(report.macro.precision == 1.0);
    CHECK(report.macro.recall == 1.0);
    CHECK(report.macro.f1 == 1.0);
    CHECK(report.macro.specificity == 1.0);
    CHECK(report.macro.mcc == 1.0);
  }

  TEST_CASE("uniform random predictions land near chance accuracy") {
    rng::Stream s(99);
    std::vector<int> truth(3000), pred(3000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth[i] = static_cast<int>(i % 3);
      pred[i] = static_cast<int>(s.next_below(3));
    }
    const auto cm = metrics::ConfusionMatrix::from_predictions(truth, pred, 3);
    const auto report = metrics::macro_report(cm);
    CHECK(std::abs(report.macro.accuracy - 1.0 / 3.0) < 0.03);
  }

  TEST_CASE("f1 is the harmonic mean of its own precision and recall") {
    rng::Stream s(321);
    for (int trial = 0; trial < 500; ++trial) {
      const auto m = metrics::binary_metrics(s.next_below(50), s.next_below(50),
                                             s.next_below(50), 1 + s.next_below(50));
      const double p = m.precision;
      const double r = m.recall;
      const double expected = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
      CHECK(std::abs(m.f1 - expected) <= 1e-12);
    }
  }

  TEST_CASE("class-swap symmetry") {
    rng::Stream s(1234);
    for (int trial = 0; trial < 300; ++trial) {
      const std::uint64_t tp = s.next_below(1000000);
      const std::uint64_t fp = s.next_below(1000000);
      const std::uint64_t fn = s.next_below(1000000);
      const std::uint64_t tn = 1 + s.next_below(1000000);
      const auto m = metrics::binary_metrics(tp, fp, fn, tn);
      const auto swapped = metrics::binary_metrics(tn, fn, fp, tp);
      // negative-class precision equals tn/(tn+fn), recall <-> specificity
      if (!m.any_degenerate() && !swapped.any_degenerate()) {
        CHECK(swapped.precision ==
              doctest::Approx(static_cast<double>(tn) /
                              static_cast<double>(tn + fn)).epsilon(1e-12));
        CHECK(swapped.recall == doctest::Approx(m.specificity).epsilon(1e-12));
        CHECK(swapped.specificity == doctest::Approx(m.recall).epsilon(1e-12));
        CHECK(swapped.mcc == doctest::Approx(m.mcc).epsilon(1e-9));
      }
      CHECK(m.accuracy >= 0.0);
      CHECK(m.accuracy <= 1.0);
      CHECK(m.precision >= 0.0);
      CHECK(m.precision <= 1.0);
      CHECK(m.recall >= 0.0);
      CHECK(m.recall <= 1.0);
      CHECK(m.f1 >= 0.0);
      CHECK(m.f1 <= 1.0);
      CHECK(m.specificity >= 0.0);
      CHECK(m.specificity <= 1.0);
      CHECK(m.mcc >= -1.0 - 1e-12);
      CHECK(m.mcc <= 1.0 + 1e-12);
    }
  }

  TEST_CASE("trace accuracy equals the binarized two-class accuracy") {
    rng::Stream s(55);
    for (int trial = 0; trial < 100; ++trial) {
      metrics::ConfusionMatrix cm(2);
      const auto a = s.next_below(40), b = s.next_below(40);
      const auto c = s.next_below(40), d = 1 + s.next_below(40);
      for (std::uint64_t i = 0; i < a; ++i) cm.add(0, 0);
      for (std::uint64_t i = 0; i < b; ++i) cm.add(0, 1);
      for (std::uint64_t i = 0; i < c; ++i) cm.add(1, 0);
      for (std::uint64_t i = 0; i < d; ++i) cm.add(1, 1);
      const auto report = metrics::macro_report(cm);
      // class 1 as the positive: tp=d, fp=b, fn=c, tn=a
      const auto bin = metrics::binary_metrics(d, b, c, a);
      CHECK(report.macro.accuracy == doctest::Approx(bin.accuracy).epsilon(1e-12));
    }
  }

  TEST_CASE("metric csv layout") {
    metrics::ConfusionMatrix cm(2);
    cm.add(0, 0);
    cm.add(1, 1);
    const auto report = metrics::macro_report(cm);
    std::ostringstream out;
    metrics::write_metric_csv(report, {"benign", "malware"}, out);
    const auto text = out.str();
    CHECK(text.find("class,tp,fp,fn,tn,precision,recall,f1,specificity,mcc") == 0);
    CHECK(text.find("benign,1,0,0,1,") != std::string::npos);
    CHECK(text.find("macro,") != std::string::npos);
  }
}

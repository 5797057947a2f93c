#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fedfuse::metrics {

/// Rows are true classes, columns are predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  static ConfusionMatrix from_predictions(std::span<const int> truth,
                                          std::span<const int> predicted,
                                          std::size_t classes);

  void add(int truth, int predicted);
  std::uint64_t at(std::size_t truth, std::size_t predicted) const;
  std::size_t classes() const { return n_; }
  std::uint64_t total() const;
  std::uint64_t trace() const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// One-vs-rest metric set. Zero-denominator metrics come back as 0 with the
/// matching degenerate flag set instead of NaN.
struct BinaryMetrics {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double specificity = 0.0;
  double mcc = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
  bool specificity_degenerate = false;
  bool mcc_degenerate = false;
  bool any_degenerate() const {
    return precision_degenerate || recall_degenerate || f1_degenerate ||
           specificity_degenerate || mcc_degenerate;
  }
};

BinaryMetrics binary_metrics(std::uint64_t tp, std::uint64_t fp,
                             std::uint64_t fn, std::uint64_t tn);

/// Unweighted averages over classes; accuracy is the multi-class
/// trace / total, and f1 is the harmonic mean of the macro precision and
/// macro recall.
struct MacroMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double specificity = 0.0;
  double mcc = 0.0;
};

struct MetricReport {
  std::vector<BinaryMetrics> per_class;
  MacroMetrics macro;
};

MetricReport macro_report(const ConfusionMatrix& cm);

/// CSV: class, tp, fp, fn, tn, precision, recall, f1, specificity, mcc —
/// one row per class plus a trailing "macro" row.
void write_metric_csv(const MetricReport& report,
                      const std::vector<std::string>& class_names,
                      std::ostream& out);

}  // namespace fedfuse::metrics

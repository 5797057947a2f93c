#include "fedfuse/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "fedfuse/errors.hpp"

namespace fedfuse::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : n_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw ConfigError("confusion matrix needs >= 1 class");
}

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> truth,
                                                  std::span<const int> predicted,
                                                  std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw DataError("label sequences differ in length");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes) {
      throw DataError("true label out of range at index " + std::to_string(i));
    }
    if (predicted[i] < 0 ||
        static_cast<std::size_t>(predicted[i]) >= classes) {
      throw DataError("predicted label out of range at index " +
                      std::to_string(i));
    }
    cm.add(truth[i], predicted[i]);
  }
  return cm;
}

void ConfusionMatrix::add(int truth, int predicted) {
  counts_[static_cast<std::size_t>(truth) * n_ +
          static_cast<std::size_t>(predicted)] += 1;
}

std::uint64_t ConfusionMatrix::at(std::size_t truth,
                                  std::size_t predicted) const {
  return counts_[truth * n_ + predicted];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

BinaryMetrics binary_metrics(std::uint64_t tp, std::uint64_t fp,
                             std::uint64_t fn, std::uint64_t tn) {
  const std::uint64_t total = tp + fp + fn + tn;
  if (total == 0) throw DataError("all confusion counts are zero");

  BinaryMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.accuracy =
      static_cast<double>(tp + tn) / static_cast<double>(total);

  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.precision_degenerate = true;
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.recall_degenerate = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_degenerate = true;
  }
  if (tn + fp > 0) {
    m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
  } else {
    m.specificity_degenerate = true;
  }

  if (fp == 0 && fn == 0 && tp > 0 && tn > 0) {
    // The product form loses ulps on large counts; these corners are exact.
    m.mcc = 1.0;
  } else if (tp == 0 && tn == 0 && fp > 0 && fn > 0) {
    m.mcc = -1.0;
  } else {
    const double d1 = static_cast<double>(tp + fp);
    const double d2 = static_cast<double>(tp + fn);
    const double d3 = static_cast<double>(tn + fp);
    const double d4 = static_cast<double>(tn + fn);
    if (d1 == 0.0 || d2 == 0.0 || d3 == 0.0 || d4 == 0.0) {
      m.mcc_degenerate = true;
    } else {
      const double num = static_cast<double>(tp) * static_cast<double>(tn) -
                         static_cast<double>(fp) * static_cast<double>(fn);
      m.mcc = num / std::sqrt(d1 * d2 * d3 * d4);
    }
  }
  return m;
}

MetricReport macro_report(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw DataError("confusion matrix is empty");

  MetricReport report;
  const std::size_t n = cm.classes();
  report.per_class.reserve(n);

  double sum_p = 0.0, sum_r = 0.0, sum_s = 0.0, sum_m = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t fn = row - tp;
    const std::uint64_t fp = col - tp;
    const std::uint64_t tn = total - tp - fn - fp;
    const auto m = binary_metrics(tp, fp, fn, tn);
    sum_p += m.precision;
    sum_r += m.recall;
    sum_s += m.specificity;
    sum_m += m.mcc;
    report.per_class.push_back(m);
  }

  const double dn = static_cast<double>(n);
  report.macro.accuracy =
      static_cast<double>(cm.trace()) / static_cast<double>(total);
  report.macro.precision = sum_p / dn;
  report.macro.recall = sum_r / dn;
  report.macro.specificity = sum_s / dn;
  report.macro.mcc = sum_m / dn;
  report.macro.f1 =
      (report.macro.precision + report.macro.recall > 0.0)
          ? 2.0 * report.macro.precision * report.macro.recall /
                (report.macro.precision + report.macro.recall)
          : 0.0;
  return report;
}

void write_metric_csv(const MetricReport& report,
                      const std::vector<std::string>& class_names,
                      std::ostream& out) {
  out << "class,tp,fp,fn,tn,precision,recall,f1,specificity,mcc\n";
  char buf[256];
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    const std::string name =
        c < class_names.size() ? class_names[c] : "class_" + std::to_string(c);
    std::snprintf(buf, sizeof(buf),
                  "%s,%llu,%llu,%llu,%llu,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  name.c_str(), static_cast<unsigned long long>(m.tp),
                  static_cast<unsigned long long>(m.fp),
                  static_cast<unsigned long long>(m.fn),
                  static_cast<unsigned long long>(m.tn), m.precision, m.recall,
                  m.f1, m.specificity, m.mcc);
    out << buf;
  }
  const auto& mm = report.macro;
  std::snprintf(buf, sizeof(buf), "macro,,,,,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                mm.precision, mm.recall, mm.f1, mm.specificity, mm.mcc);
  out << buf;
}

}  // namespace fedfuse::metrics

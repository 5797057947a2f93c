#include "fedfuse/dsfusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "fedfuse/errors.hpp"

namespace fedfuse::ds {

namespace {

constexpr double kMassSumTolerance = 1e-9;
constexpr double kTotalConflictTolerance = 1e-12;
constexpr double kDropThreshold = 1e-12;

}  // namespace

FrameOfDiscernment::FrameOfDiscernment(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  if (labels_.empty()) throw EvidenceError("frame needs at least one label");
  if (labels_.size() > 20) {
    throw EvidenceError("frame size is capped at 20 labels");
  }
  std::unordered_set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw EvidenceError("frame labels must be non-empty");
    if (!seen.insert(l).second) {
      throw EvidenceError("duplicate frame label: " + l);
    }
  }
}

std::optional<std::size_t> FrameOfDiscernment::index_of(
    const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

std::string FrameOfDiscernment::subset_name(Subset s) const {
  std::string out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (s & (1u << i)) {
      if (!out.empty()) out += '+';
      out += labels_[i];
    }
  }
  return out.empty() ? "{}" : out;
}

MassFunction::MassFunction(FrameOfDiscernment frame,
                           std::vector<std::pair<Subset, double>> assignments)
    : frame_(std::move(frame)) {
  std::map<Subset, double> merged;
  for (const auto& [subset, mass] : assignments) {
    if (mass < 0.0) throw EvidenceError("mass values must be nonnegative");
    if (subset == 0 && mass > 0.0) {
      throw EvidenceError("the empty set must carry zero mass");
    }
    if ((subset & ~frame_.full_set()) != 0) {
      throw EvidenceError("subset reaches outside the frame");
    }
    if (mass > 0.0) merged[subset] += mass;
  }
  double sum = 0.0;
  for (const auto& [subset, mass] : merged) sum += mass;
  if (std::abs(sum - 1.0) > kMassSumTolerance) {
    throw EvidenceError("masses sum to " + std::to_string(sum) +
                        ", expected 1");
  }
  focal_.assign(merged.begin(), merged.end());
}

MassFunction MassFunction::vacuous(FrameOfDiscernment frame) {
  const Subset full = frame.full_set();
  return MassFunction(std::move(frame), {{full, 1.0}});
}

double MassFunction::mass(Subset s) const {
  const auto it = std::lower_bound(
      focal_.begin(), focal_.end(), s,
      [](const auto& entry, Subset key) { return entry.first < key; });
  return (it != focal_.end() && it->first == s) ? it->second : 0.0;
}

bool MassFunction::is_bayesian() const {
  return std::all_of(focal_.begin(), focal_.end(), [](const auto& e) {
    return (e.first & (e.first - 1)) == 0;
  });
}

MassFunction mass_from_probs(const FrameOfDiscernment& frame,
                             std::span<const double> probs) {
  if (probs.size() != frame.size()) {
    throw EvidenceError("probability vector length does not match the frame");
  }
  double sum = 0.0;
  for (const double p : probs) {
    if (p < 0.0 || !std::isfinite(p)) {
      throw EvidenceError("probabilities must be finite and nonnegative");
    }
    sum += p;
  }
  if (!(sum > 0.0)) {
    throw EvidenceError("cannot build evidence from an all-zero vector");
  }
  double kept = 0.0;
  std::vector<std::pair<Subset, double>> focal;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i] / sum;
    if (p >= kDropThreshold) {
      focal.emplace_back(frame.singleton(i), p);
      kept += p;
    }
  }
  if (focal.empty()) {
    throw EvidenceError("all probability entries below the drop threshold");
  }
  for (auto& [subset, mass] : focal) mass /= kept;
  return MassFunction(frame, std::move(focal));
}

CombinationResult ds_combine(const MassFunction& m1, const MassFunction& m2) {
  if (!(m1.frame() == m2.frame())) {
    throw EvidenceError("cannot combine masses over different frames");
  }
  std::map<Subset, double> acc;
  double conflict = 0.0;
  for (const auto& [s1, v1] : m1.focal()) {
    for (const auto& [s2, v2] : m2.focal()) {
      const Subset inter = s1 & s2;
      const double product = v1 * v2;
      if (inter == 0) {
        conflict += product;
      } else {
        acc[inter] += product;
      }
    }
  }
  if (conflict >= 1.0 - kTotalConflictTolerance) {
    throw TotalConflictError("total conflict between evidence sources", 0);
  }
  const double norm = 1.0 - conflict;
  std::vector<std::pair<Subset, double>> focal;
  focal.reserve(acc.size());
  for (const auto& [subset, mass] : acc) {
    focal.emplace_back(subset, mass / norm);
  }
  return CombinationResult{MassFunction(m1.frame(), std::move(focal)),
                           conflict};
}

CombinationResult combine_all(const std::vector<MassFunction>& masses) {
  if (masses.empty()) {
    throw EvidenceError("combine_all needs at least one mass function");
  }
  for (std::size_t i = 1; i < masses.size(); ++i) {
    if (!(masses[i].frame() == masses[0].frame())) {
      throw EvidenceError("mass " + std::to_string(i) +
                          " uses a different frame");
    }
  }
  CombinationResult result{masses[0], 0.0};
  double survival = 1.0;  // prod(1 - K_step)
  for (std::size_t i = 1; i < masses.size(); ++i) {
    CombinationResult step = [&] {
      try {
        return ds_combine(result.combined, masses[i]);
      } catch (const TotalConflictError&) {
        throw TotalConflictError("total conflict while folding evidence", i);
      }
    }();
    survival *= 1.0 - step.conflict;
    result.combined = std::move(step.combined);
  }
  result.conflict = 1.0 - survival;
  return result;
}

double nary_conflict(const std::vector<MassFunction>& masses) {
  if (masses.empty()) return 0.0;
  double conflict = 0.0;
  // Depth-first walk over one focal element per source.
  std::vector<std::size_t> pick(masses.size(), 0);
  const std::size_t l = masses.size();
  std::size_t depth = 0;
  std::vector<Subset> inter(l + 1);
  std::vector<double> prod(l + 1);
  inter[0] = masses[0].frame().full_set();
  prod[0] = 1.0;
  while (true) {
    if (depth == l) {
      if (inter[l] == 0) conflict += prod[l];
      --depth;
      ++pick[depth];
    } else if (pick[depth] >= masses[depth].focal().size()) {
      if (depth == 0) break;
      pick[depth] = 0;
      --depth;
      ++pick[depth];
    } else {
      const auto& [subset, mass] = masses[depth].focal()[pick[depth]];
      inter[depth + 1] = inter[depth] & subset;
      prod[depth + 1] = prod[depth] * mass;
      ++depth;
    }
  }
  return conflict;
}

double belief(const MassFunction& m, Subset a) {
  double total = 0.0;
  for (const auto& [subset, mass] : m.focal()) {
    if ((subset & ~a) == 0) total += mass;
  }
  return total;
}

double plausibility(const MassFunction& m, Subset a) {
  const Subset complement = m.frame().full_set() & ~a;
  return 1.0 - belief(m, complement);
}

Decision decide_max_belief(const CombinationResult& result) {
  const auto& frame = result.combined.frame();
  Decision best;
  best.index = 0;
  best.label = frame.labels()[0];
  best.belief = belief(result.combined, frame.singleton(0));
  for (std::size_t i = 1; i < frame.size(); ++i) {
    const double b = belief(result.combined, frame.singleton(i));
    if (b > best.belief) {
      best.index = i;
      best.label = frame.labels()[i];
      best.belief = b;
    }
  }
  return best;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

Subset parse_subset(const std::string& token, const FrameOfDiscernment& frame,
                    std::size_t line_no) {
  Subset s = 0;
  std::string label;
  std::istringstream in(token);
  while (std::getline(in, label, '+')) {
    const auto idx = frame.index_of(label);
    if (!idx) {
      throw ParseError("unknown label '" + label + "' in subset '" + token +
                           "'",
                       line_no);
    }
    s |= frame.singleton(*idx);
  }
  if (s == 0) throw ParseError("empty subset '" + token + "'", line_no);
  return s;
}

}  // namespace

MassFile load_mass_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mass file: " + path);

  std::optional<FrameOfDiscernment> frame;
  std::vector<MassRecord> records;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;

    if (tokens[0] == "frame") {
      if (frame) throw ParseError("duplicate frame declaration", line_no);
      if (tokens.size() < 2) {
        throw ParseError("frame declaration needs labels", line_no);
      }
      try {
        frame.emplace(
            std::vector<std::string>(tokens.begin() + 1, tokens.end()));
      } catch (const EvidenceError& e) {
        throw ParseError(e.what(), line_no);
      }
    } else if (tokens[0] == "mass") {
      if (!frame) {
        throw ParseError("mass record before the frame declaration", line_no);
      }
      if (tokens.size() < 3) {
        throw ParseError("mass record needs a source name and assignments",
                         line_no);
      }
      std::vector<std::pair<Subset, double>> focal;
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        const auto eq = tokens[i].find('=');
        if (eq == std::string::npos) {
          throw ParseError("expected SUBSET=VALUE, got '" + tokens[i] + "'",
                           line_no);
        }
        const Subset subset =
            parse_subset(tokens[i].substr(0, eq), *frame, line_no);
        const std::string value_str = tokens[i].substr(eq + 1);
        double value = 0.0;
        const auto res = std::from_chars(
            value_str.data(), value_str.data() + value_str.size(), value);
        if (res.ec != std::errc() ||
            res.ptr != value_str.data() + value_str.size()) {
          throw ParseError("non-numeric mass '" + value_str + "'", line_no);
        }
        for (const auto& [existing, _] : focal) {
          if (existing == subset) {
            throw ParseError("duplicate subset in record", line_no);
          }
        }
        focal.emplace_back(subset, value);
      }
      try {
        records.push_back(MassRecord{tokens[1], MassFunction(*frame, focal)});
      } catch (const EvidenceError& e) {
        throw ParseError(e.what(), line_no);
      }
    } else {
      throw ParseError("unknown directive '" + tokens[0] + "'", line_no);
    }
  }
  if (!frame) throw ParseError("no frame declaration in " + path);
  if (records.empty()) throw ParseError("no mass records in " + path);
  return MassFile{*frame, std::move(records)};
}

}  // namespace fedfuse::ds

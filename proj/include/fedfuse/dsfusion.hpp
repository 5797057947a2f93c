#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedfuse::ds {

/// Subsets of the frame are bitmasks over label indices; bit i set means the
/// i-th label belongs to the subset. The frame size is capped at 20, so set
/// algebra stays exact and cheap.
using Subset = std::uint32_t;

class FrameOfDiscernment {
 public:
  explicit FrameOfDiscernment(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  Subset full_set() const {
    return static_cast<Subset>((1u << labels_.size()) - 1u);
  }
  Subset singleton(std::size_t index) const {
    return static_cast<Subset>(1u << index);
  }
  std::optional<std::size_t> index_of(const std::string& label) const;

  /// Renders a subset as its member labels joined by '+' ("A+B").
  std::string subset_name(Subset s) const;

  bool operator==(const FrameOfDiscernment&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// Basic probability assignment: positive masses on non-empty subsets of the
/// frame, summing to one. Zero-mass subsets are never stored.
class MassFunction {
 public:
  MassFunction(FrameOfDiscernment frame,
               std::vector<std::pair<Subset, double>> assignments);

  static MassFunction vacuous(FrameOfDiscernment frame);

  const FrameOfDiscernment& frame() const { return frame_; }
  const std::vector<std::pair<Subset, double>>& focal() const {
    return focal_;
  }
  double mass(Subset s) const;
  bool is_bayesian() const;  // all focal elements are singletons

 private:
  FrameOfDiscernment frame_;
  std::vector<std::pair<Subset, double>> focal_;  // sorted by subset
};

/// Bayesian mass from a nonnegative score vector (one entry per class).
/// Scores are normalized; entries below 1e-12 are dropped and the rest
/// renormalized.
MassFunction mass_from_probs(const FrameOfDiscernment& frame,
                             std::span<const double> probs);

struct CombinationResult {
  MassFunction combined;
  double conflict = 0.0;  // cumulative over fold steps: 1 - prod(1 - K_i)
};

/// Dempster's orthogonal combination of two mass functions over the same
/// frame. Conflict K is the total product mass on empty intersections;
/// K ~ 1 raises TotalConflictError since the normalization is undefined.
CombinationResult ds_combine(const MassFunction& m1, const MassFunction& m2);

/// Left fold of ds_combine over the list; the reported conflict is the
/// cumulative 1 - prod(1 - K_step).
CombinationResult combine_all(const std::vector<MassFunction>& masses);

/// Direct l-ary conflict: total product mass over source tuples whose
/// intersection is empty. Exposed alongside the fold-wise cumulative value;
/// cost grows with the product of focal-set sizes.
double nary_conflict(const std::vector<MassFunction>& masses);

/// Bel(A): total mass on non-empty subsets of A.
double belief(const MassFunction& m, Subset a);

/// Pl(A) = 1 - Bel(complement of A).
double plausibility(const MassFunction& m, Subset a);

struct Decision {
  std::size_t index = 0;
  std::string label;
  double belief = 0.0;
};

/// Singleton class with maximal belief; ties resolve to the lowest frame
/// index.
Decision decide_max_belief(const CombinationResult& result);

/// One named evidence source from a mass file.
struct MassRecord {
  std::string source;
  MassFunction mass;
};

struct MassFile {
  FrameOfDiscernment frame;
  std::vector<MassRecord> records;
};

/// Text format: a "frame L1 L2 ..." line followed by "mass NAME SUBSET=V ..."
/// records, where SUBSET is labels joined by '+'. '#' starts a comment.
MassFile load_mass_file(const std::string& path);

}  // namespace fedfuse::ds

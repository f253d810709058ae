#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neumannlab/energy.hpp"
#include "neumannlab/error.hpp"
#include "neumannlab/functional.hpp"
#include "neumannlab/morse.hpp"
#include "neumannlab/nonlinearity.hpp"

namespace neumannlab {

struct LedgerConfig {
  double simplicity_tol = 1e-6;
  double qual_tol = 1e-8;
  double range_margin = 1e-3;
  double dedup_radius = 1e-4;
  double transfer_residual_factor = 10.0;
};

/// Leray-Schauder index of an isolated critical point.
inline int local_degree(const CriticalPointRecord& r, int k) {
  switch (r.classification) {
    case Classification::mp_type: return -1;
    case Classification::reduction_max:
      if (r.degenerate) return (k % 2 == 0) ? 1 : -1;
      break;
    default: break;
  }
  if (r.degenerate) {
    throw Error(ErrorCode::UnclassifiedDegenerate, "degenerate record without a known critical-group signature");
  }
  return (r.morse_index % 2 == 0) ? 1 : -1;
}

struct QualitativeCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
};

struct QualitativeReport {
  std::vector<QualitativeCheck> checks;
  bool pass = true;
};

/// Maximum-principle sign checks at the grid extrema plus the ordering a
/// truncation imposes relative to its anchors.
inline QualitativeReport qualitative_classify(const CriticalPointRecord& r, const Nonlinearity& f,
                                              double qual_tol = 1e-8, double constant_tol = 1e-9) {
  QualitativeReport rep;
  auto add = [&](std::string name, bool ok, double v) {
    rep.checks.push_back({std::move(name), ok, v});
    rep.pass = rep.pass && ok;
  };
  if (!r.is_constant(constant_tol)) {
    const double fmax = f(r.range_max);
    const double fmin = f(r.range_min);
    add("f(max u) > 0", fmax > qual_tol, fmax);
    add("f(min u) < 0", fmin < -qual_tol, fmin);
    if (r.truncation) {
      const TruncationKind& t = *r.truncation;
      switch (t.type) {
        case TruncationKind::Type::below: add("max u < alpha", r.range_max < t.alpha, r.range_max - t.alpha); break;
        case TruncationKind::Type::above: add("min u > alpha", r.range_min > t.alpha, r.range_min - t.alpha); break;
        case TruncationKind::Type::interval:
          add("min u > alpha", r.range_min > t.alpha, r.range_min - t.alpha);
          add("max u < beta", r.range_max < t.beta, r.range_max - t.beta);
          break;
        case TruncationKind::Type::homotopy: break;
      }
    }
  }
  return rep;
}

/// Re-evaluates a record produced under `truncated` with the original
/// functional. Valid when the record's range sits inside the region where
/// both nonlinearities coincide.
inline CriticalPointRecord transfer_to_original(const CriticalPointRecord& r, const EnergyFunctional& original,
                                                const Nonlinearity& truncated, double range_margin = 1e-3,
                                                double degeneracy_tol = 1e-7) {
  const AgreementRegion& region = truncated.agreement();
  if (!region.contains(r.range_min - range_margin, r.range_max + range_margin)) {
    throw Error(ErrorCode::RangeEscape, "record range leaves the region where the truncation agrees with f");
  }
  CriticalPointRecord out = make_record(original, r.u.coeffs(), r.classification, r.provenance, degeneracy_tol);
  out.truncation = r.truncation;
  out.iterations = r.iterations;
  out.warnings = r.warnings;
  return out;
}

struct LedgerEntry {
  CriticalPointRecord record;
  std::optional<int> degree;
  QualitativeReport qualitative;
  bool inside_ball = true;
  std::vector<std::string> aliases;  // provenance of merged duplicates
  std::vector<std::string> flags;
};

struct Suggestion {
  Eigen::VectorXd center;
  std::string reason;
};

struct LedgerReport {
  int k = 0;
  double radius = 0.0;
  int global_degree = 1;
  int degree_sum = 0;
  int deficiency = 0;
  int counted = 0;
  int nonconstant = 0;
  std::vector<std::string> flags;
  bool balanced = false;
  bool undiscovered_asserted = false;
  std::vector<Suggestion> suggestions;
};

class DegreeLedger {
 public:
  DegreeLedger(int k, double radius, Eigen::VectorXd weights, LedgerConfig cfg = {})
      : k_(k), radius_(radius), weights_(std::move(weights)), cfg_(cfg) {}

  int k() const { return k_; }
  double radius() const { return radius_; }
  void set_radius(double r) { radius_ = r; }
  const LedgerConfig& config() const { return cfg_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  int global_degree() const { return (k_ % 2 == 0) ? 1 : -1; }

  /// Index of an existing entry within dedup_radius of u, if any.
  std::optional<std::size_t> find(const Eigen::VectorXd& u) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (metric_norm(weights_, entries_[i].record.u.coeffs() - u) <= cfg_.dedup_radius) return i;
    }
    return std::nullopt;
  }

  /// Adds a record already validated against the original functional.
  /// Returns false (and records an alias) when it duplicates an entry.
  bool add(CriticalPointRecord r, QualitativeReport q = {}) {
    if (auto i = find(r.u.coeffs())) {
      LedgerEntry& e = entries_[*i];
      e.aliases.push_back(r.provenance);
      // A reduction maximizer supplies the signature a degenerate point lacks.
      if (!e.degree && r.classification == Classification::reduction_max) {
        e.record.classification = Classification::reduction_max;
        e.degree = local_degree(e.record, k_);
        std::erase(e.flags, std::string(to_string(ErrorCode::UnclassifiedDegenerate)));
      }
      return false;
    }
    LedgerEntry e;
    e.qualitative = std::move(q);
    e.inside_ball = r.h1_norm <= radius_;
    try {
      e.degree = local_degree(r, k_);
    } catch (const Error& err) {
      e.flags.push_back(std::string(to_string(err.code())));
    }
    if (!e.inside_ball) e.flags.push_back("outside B_R");
    e.record = std::move(r);
    entries_.push_back(std::move(e));
    return true;
  }

  void refresh_ball() {
    for (auto& e : entries_) {
      e.inside_ball = e.record.h1_norm <= radius_;
      std::erase(e.flags, std::string("outside B_R"));
      if (!e.inside_ball) e.flags.push_back("outside B_R");
    }
  }

 private:
  int k_;
  double radius_;
  Eigen::VectorXd weights_;
  LedgerConfig cfg_;
  std::vector<LedgerEntry> entries_;
};

/// Degree count over the ball. `reflections` are coefficient sign patterns
/// of domain symmetries; images of known nonconstant solutions that are not
/// in the ledger become suggested starts.
inline LedgerReport reconcile(const DegreeLedger& ledger, const std::vector<Eigen::VectorXd>& reflections = {}) {
  LedgerReport rep;
  rep.k = ledger.k();
  rep.radius = ledger.radius();
  rep.global_degree = ledger.global_degree();
  for (const auto& e : ledger.entries()) {
    if (!e.record.is_constant()) ++rep.nonconstant;
    if (!e.inside_ball) {
      rep.flags.push_back(e.record.provenance + ": outside B_R, excluded");
      continue;
    }
    if (!e.degree) {
      rep.flags.push_back(e.record.provenance + ": degenerate, no degree");
      continue;
    }
    rep.degree_sum += *e.degree;
    ++rep.counted;
  }
  rep.deficiency = rep.global_degree - rep.degree_sum;
  rep.balanced = rep.deficiency == 0;
  rep.undiscovered_asserted = !rep.balanced;
  if (!rep.balanced) {
    for (const auto& e : ledger.entries()) {
      if (e.record.is_constant()) continue;
      for (const auto& s : reflections) {
        const Eigen::VectorXd image = s.cwiseProduct(e.record.u.coeffs());
        if (ledger.find(image)) continue;
        const bool listed = std::any_of(rep.suggestions.begin(), rep.suggestions.end(), [&](const Suggestion& q) {
          return (q.center - image).norm() <= 1e-12 * std::max(1.0, image.norm());
        });
        if (!listed) rep.suggestions.push_back({image, "reflection of " + e.record.provenance});
      }
    }
  }
  return rep;
}

}  // namespace neumannlab

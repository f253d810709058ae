#pragma once

// Critical point records and their Morse data: Hessian spectrum in the H^1
// metric, Morse index, degeneracy, and the principal-eigenpair data the
// Hess-Kato check consumes.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neumannlab/functional.hpp"
#include "neumannlab/nonlinearity.hpp"
#include "neumannlab/spectrum.hpp"

namespace neumannlab {

enum class Classification { constant, mp_type, reduction_max, minimizer, other };

inline std::string to_string(Classification c) {
  switch (c) {
    case Classification::constant: return "constant";
    case Classification::mp_type: return "mp_type";
    case Classification::reduction_max: return "reduction_max";
    case Classification::minimizer: return "minimizer";
    case Classification::other: return "other";
  }
  return "other";
}

struct CriticalPointRecord {
  SpectralField u;
  double energy = 0.0;
  double residual = 0.0;
  Eigen::VectorXd hessian_eigs;  // ascending
  int morse_index = 0;
  bool degenerate = false;
  Classification classification = Classification::other;
  std::string provenance;
  double range_min = 0.0;
  double range_max = 0.0;
  double h1_norm = 0.0;
  int iterations = 0;

  /// Principal Hessian eigenvector (coefficients, unit H^1 norm) and the
  /// extremes of its grid samples after orienting to max |v| = 1, v summed
  /// positive.
  Eigen::VectorXd principal_direction;
  double principal_min = 0.0;
  double principal_max = 0.0;
  bool principal_on_grid = false;

  /// Which truncation (if any) of the base nonlinearity produced this point.
  std::optional<TruncationKind> truncation;
  std::vector<std::string> warnings;

  bool is_constant(double tol = 1e-9) const {
    const Eigen::VectorXd& c = u.coeffs();
    return c.size() < 2 || c.tail(c.size() - 1).norm() <= tol * std::max(1.0, c.norm());
  }
};

struct HessianAnalysis {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns in coefficient space, unit H^1 norm
  int morse_index = 0;
  bool degenerate = false;
  double asymmetry = 0.0;        // || D H - (D H)^T || / || D H ||
};

/// Eigen-analysis of the H^1-self-adjoint Hessian through the symmetric
/// similarity transform S = D^{1/2} H D^{-1/2}.
inline HessianAnalysis analyze_hessian(const Eigen::MatrixXd& h, const Eigen::VectorXd& w, double degeneracy_tol) {
  const Eigen::VectorXd sq = w.cwiseSqrt();
  const Eigen::MatrixXd dh = w.asDiagonal() * h;
  Eigen::MatrixXd s = sq.asDiagonal() * h * sq.cwiseInverse().asDiagonal();
  HessianAnalysis a;
  a.asymmetry = (dh - dh.transpose()).norm() / std::max(1e-300, dh.norm());
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  a.eigenvalues = es.eigenvalues();
  a.eigenvectors = sq.cwiseInverse().asDiagonal() * es.eigenvectors();
  for (Eigen::Index i = 0; i < a.eigenvalues.size(); ++i) {
    if (a.eigenvalues[i] < -degeneracy_tol) ++a.morse_index;
    if (std::abs(a.eigenvalues[i]) < degeneracy_tol) a.degenerate = true;
  }
  return a;
}

template <GradientFunctional F>
HessianAnalysis analyze_hessian(const F& j, const Eigen::VectorXd& u, double degeneracy_tol) {
  return analyze_hessian(j.hessian(u), j.weights(), degeneracy_tol);
}

/// Fill every derived field of a record at u.
template <GradientFunctional F>
CriticalPointRecord make_record(const F& j, const Eigen::VectorXd& u, Classification cls, std::string provenance,
                                double degeneracy_tol) {
  CriticalPointRecord r;
  r.u = SpectralField(u);
  r.energy = j.value(u);
  r.residual = metric_norm(j.weights(), j.gradient(u));
  r.h1_norm = metric_norm(j.weights(), u);
  const HessianAnalysis a = analyze_hessian(j, u, degeneracy_tol);
  r.hessian_eigs = a.eigenvalues;
  r.morse_index = a.morse_index;
  r.degenerate = a.degenerate;
  r.classification = cls;
  r.provenance = std::move(provenance);
  r.principal_direction = a.eigenvectors.col(0);
  if constexpr (GridFunctional<F>) {
    std::tie(r.range_min, r.range_max) = j.range(u);
    Eigen::VectorXd v = j.evaluate(r.principal_direction);
    if (v.sum() < 0.0) v = -v;
    const double scale = v.cwiseAbs().maxCoeff();
    if (scale > 0.0) v /= scale;
    r.principal_min = v.minCoeff();
    r.principal_max = v.maxCoeff();
    r.principal_on_grid = true;
  } else {
    r.range_min = u.minCoeff();
    r.range_max = u.maxCoeff();
  }
  return r;
}

struct HessKatoOptions {
  double simplicity_tol = 1e-6;  // relative gap
  double qual_tol = 1e-8;
};

/// Simple, sign-definite principal eigenpair. nullopt when the smallest
/// Hessian eigenvalue is not negative (check not applicable).
inline std::optional<bool> hess_kato_check(const CriticalPointRecord& r, const HessKatoOptions& opt = {}) {
  if (r.hessian_eigs.size() == 0 || !(r.hessian_eigs[0] < 0.0)) return std::nullopt;
  bool simple = true;
  if (r.hessian_eigs.size() > 1) {
    const double gap = r.hessian_eigs[1] - r.hessian_eigs[0];
    simple = gap >= opt.simplicity_tol * std::max(1.0, std::abs(r.hessian_eigs[0]));
  }
  const bool sign_definite = !r.principal_on_grid || r.principal_min > -opt.qual_tol;
  return simple && sign_definite;
}

}  // namespace neumannlab

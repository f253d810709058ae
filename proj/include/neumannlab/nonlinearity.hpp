#pragma once

// C^1 asymptotically affine nonlinearities f built from cubic Hermite pieces
// with affine tails, plus the truncations and the linear homotopy used by the
// multiplicity stages.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neumannlab/error.hpp"
#include "neumannlab/spectrum.hpp"

namespace neumannlab {

/// Hermite datum: f(t) = value, f'(t) = slope.
struct HermiteNode {
  double t = 0.0;
  double value = 0.0;
  double slope = 0.0;
};

/// A prescribed simple zero of f with its slope.
struct Knot {
  double t = 0.0;
  double slope = 0.0;
};

struct TruncationKind {
  enum class Type { below, above, interval, homotopy };

  Type type = Type::below;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;

  static TruncationKind below(double alpha) { return {Type::below, alpha, 0.0, 0.0}; }
  static TruncationKind above(double alpha) { return {Type::above, alpha, 0.0, 0.0}; }
  static TruncationKind between(double alpha, double beta) { return {Type::interval, alpha, beta, 0.0}; }
  static TruncationKind homotopy(double lambda) { return {Type::homotopy, 0.0, 0.0, lambda}; }
};

inline std::string to_string(TruncationKind::Type t) {
  switch (t) {
    case TruncationKind::Type::below: return "below";
    case TruncationKind::Type::above: return "above";
    case TruncationKind::Type::interval: return "interval";
    case TruncationKind::Type::homotopy: return "homotopy";
  }
  return "unknown";
}

/// Closed set [lo, hi] on which a derived nonlinearity equals its parent.
struct AgreementRegion {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool empty = false;

  bool contains(double a, double b) const { return !empty && lo <= a && b <= hi; }
};

class Nonlinearity {
 public:
  /// Validated construction from prescribed zeros. The outermost node is
  /// joined to the affine tail t -> s_inf (t - t_outer) by one cubic on a
  /// blend interval of width `blend_margin`.
  static Nonlinearity build(std::vector<Knot> knots, double slope_minus_inf, double slope_plus_inf,
                            double blend_margin = 1.0, std::vector<HermiteNode> shape_points = {}) {
    if (!std::isfinite(slope_minus_inf) || !std::isfinite(slope_plus_inf)) {
      throw Error(ErrorCode::InvalidArgument, "asymptotic slopes must be finite");
    }
    if (!(blend_margin > 0.0) || !std::isfinite(blend_margin)) {
      throw Error(ErrorCode::NonC1Blend, "blend margin must be positive and finite");
    }
    std::vector<HermiteNode> nodes;
    for (const Knot& k : knots) {
      if (!std::isfinite(k.t) || !std::isfinite(k.slope)) {
        throw Error(ErrorCode::InvalidArgument, "knot data must be finite");
      }
      nodes.push_back({k.t, 0.0, k.slope});
    }
    for (const HermiteNode& p : shape_points) {
      if (!std::isfinite(p.t) || !std::isfinite(p.value) || !std::isfinite(p.slope)) {
        throw Error(ErrorCode::InvalidArgument, "shape point data must be finite");
      }
      nodes.push_back(p);
    }
    if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one knot or shape point");
    std::sort(nodes.begin(), nodes.end(), [](const HermiteNode& a, const HermiteNode& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (nodes[i].t == nodes[i - 1].t) {
        throw Error(ErrorCode::DuplicateKnots, "two nodes at t = " + std::to_string(nodes[i].t));
      }
    }
    const HermiteNode first = nodes.front();
    const HermiteNode last = nodes.back();
    nodes.insert(nodes.begin(),
                 HermiteNode{first.t - blend_margin, first.value - slope_minus_inf * blend_margin, slope_minus_inf});
    nodes.push_back(HermiteNode{last.t + blend_margin, last.value + slope_plus_inf * blend_margin, slope_plus_inf});

    Nonlinearity f(std::move(nodes));
    std::sort(knots.begin(), knots.end(), [](const Knot& a, const Knot& b) { return a.t < b.t; });
    f.knots_ = std::move(knots);
    f.blend_margin_ = blend_margin;
    // Hermite data is reproduced exactly at every node; confirm the
    // one-sided derivatives agree at the blend joints.
    for (std::size_t i = 0; i + 1 < f.nodes_.size(); ++i) {
      const double h = f.nodes_[i + 1].t - f.nodes_[i].t;
      const double mismatch = std::abs(f.pieces_[i].derivative(h) - f.nodes_[i + 1].slope);
      if (mismatch > 1e-9 * std::max(1.0, std::abs(f.nodes_[i + 1].slope))) {
        throw Error(ErrorCode::NonC1Blend, "derivative mismatch at t = " + std::to_string(f.nodes_[i + 1].t));
      }
    }
    return f;
  }

  /// f(t) = a t.
  static Nonlinearity linear(double a) { return build({{0.0, a}}, a, a); }

  /// Raw node form; the tails continue the end nodes' slopes.
  static Nonlinearity from_nodes(std::vector<HermiteNode> nodes) {
    if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one node");
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (!(nodes[i].t > nodes[i - 1].t)) throw Error(ErrorCode::DuplicateKnots, "nodes must increase strictly");
    }
    return Nonlinearity(std::move(nodes));
  }

  double operator()(double t) const { return value(t); }

  double value(double t) const {
    const Locate loc = locate(t);
    switch (loc.where) {
      case Where::left: return nodes_.front().value + nodes_.front().slope * (t - nodes_.front().t);
      case Where::right: return nodes_.back().value + nodes_.back().slope * (t - nodes_.back().t);
      case Where::piece: return pieces_[loc.piece].value(t - nodes_[loc.piece].t);
    }
    return 0.0;
  }

  double derivative(double t) const {
    const Locate loc = locate(t);
    switch (loc.where) {
      case Where::left: return nodes_.front().slope;
      case Where::right: return nodes_.back().slope;
      case Where::piece: return pieces_[loc.piece].derivative(t - nodes_[loc.piece].t);
    }
    return 0.0;
  }

  /// F(t) = int_0^t f, exact.
  double primitive(double t) const { return raw_primitive(t) - primitive_offset_; }

  double slope_minus_inf() const { return nodes_.front().slope; }
  double slope_plus_inf() const { return nodes_.back().slope; }

  /// sup f' over the real line (exact over the piecewise quadratic f').
  double gamma() const { return gamma_; }
  /// inf f' over the real line.
  double slope_lower_bound() const { return slope_min_; }

  const std::vector<HermiteNode>& nodes() const { return nodes_; }
  const std::vector<Knot>& knots() const { return knots_; }
  double blend_margin() const { return blend_margin_; }

  /// Beyond these points f is exactly affine.
  double affine_left_end() const { return nodes_.front().t; }
  double affine_right_start() const { return nodes_.back().t; }

  const std::optional<TruncationKind>& truncation() const { return truncation_; }
  const AgreementRegion& agreement() const { return agreement_; }

  /// All real zeros of f, ascending.
  std::vector<double> zeros() const {
    std::vector<double> out;
    const HermiteNode& a = nodes_.front();
    if (a.slope != 0.0) {
      const double t = a.t - a.value / a.slope;
      if (t < a.t) out.push_back(t);
    }
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      for (double s : pieces_[i].roots(nodes_[i + 1].t - nodes_[i].t)) out.push_back(nodes_[i].t + s);
    }
    const HermiteNode& b = nodes_.back();
    if (b.value == 0.0) {
      out.push_back(b.t);
    } else if (b.slope != 0.0) {
      const double t = b.t - b.value / b.slope;
      if (t > b.t) out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }),
              out.end());
    return out;
  }

  /// Same function with an extra node at t (exact split of a cubic piece).
  Nonlinearity with_node(double t) const {
    for (const auto& n : nodes_) {
      if (n.t == t) return *this;
    }
    std::vector<HermiteNode> nodes = nodes_;
    nodes.push_back({t, value(t), derivative(t)});
    std::sort(nodes.begin(), nodes.end(), [](const HermiteNode& a, const HermiteNode& b) { return a.t < b.t; });
    Nonlinearity out(std::move(nodes));
    out.copy_metadata(*this);
    return out;
  }

 private:
  struct Cubic {
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;

    double value(double s) const { return c0 + s * (c1 + s * (c2 + s * c3)); }
    double derivative(double s) const { return c1 + s * (2.0 * c2 + s * 3.0 * c3); }
    double integral(double s) const { return s * (c0 + s * (c1 / 2.0 + s * (c2 / 3.0 + s * c3 / 4.0))); }

    /// Interior critical points of the cubic in (0, h).
    std::vector<double> critical_points(double h) const {
      std::vector<double> r;
      const double a = 3.0 * c3;
      const double b = 2.0 * c2;
      const double c = c1;
      if (a == 0.0) {
        if (b != 0.0) r.push_back(-c / b);
      } else {
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
          const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
          if (q != 0.0) r.push_back(q / a);
          r.push_back(q != 0.0 ? c / q : -b / (2.0 * a));
        }
      }
      std::erase_if(r, [h](double s) { return !(s > 0.0 && s < h); });
      std::sort(r.begin(), r.end());
      return r;
    }

    /// Roots in [0, h).
    std::vector<double> roots(double h) const {
      std::vector<double> out;
      std::vector<double> cuts{0.0};
      for (double s : critical_points(h)) cuts.push_back(s);
      cuts.push_back(h);
      if (value(0.0) == 0.0) out.push_back(0.0);
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double lo = cuts[i];
        double hi = cuts[i + 1];
        double flo = value(lo);
        const double fhi = value(hi);
        if (i > 0 && std::abs(flo) <= 1e-14) {
          out.push_back(lo);  // touching root at a critical point
          continue;
        }
        if (flo == 0.0 || fhi == 0.0 || (flo < 0.0) == (fhi < 0.0)) continue;
        for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, h); ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = value(mid);
          if (fm == 0.0) {
            lo = hi = mid;
            break;
          }
          if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        out.push_back(0.5 * (lo + hi));
      }
      return out;
    }
  };

  enum class Where { left, piece, right };
  struct Locate {
    Where where;
    std::size_t piece;
  };

  explicit Nonlinearity(std::vector<HermiteNode> nodes) : nodes_(std::move(nodes)) {
    ts_.reserve(nodes_.size());
    for (const auto& n : nodes_) ts_.push_back(n.t);
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
      const HermiteNode& a = nodes_[i];
      const HermiteNode& b = nodes_[i + 1];
      const double h = b.t - a.t;
      const double secant = (b.value - a.value) / h;
      Cubic c;
      c.c0 = a.value;
      c.c1 = a.slope;
      c.c2 = (3.0 * secant - 2.0 * a.slope - b.slope) / h;
      c.c3 = (a.slope + b.slope - 2.0 * secant) / (h * h);
      pieces_.push_back(c);
    }
    node_primitive_.assign(nodes_.size(), 0.0);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      node_primitive_[i + 1] = node_primitive_[i] + pieces_[i].integral(nodes_[i + 1].t - nodes_[i].t);
    }
    primitive_offset_ = raw_primitive(0.0);

    gamma_ = std::max(nodes_.front().slope, nodes_.back().slope);
    slope_min_ = std::min(nodes_.front().slope, nodes_.back().slope);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const Cubic& c = pieces_[i];
      const double h = nodes_[i + 1].t - nodes_[i].t;
      std::vector<double> cand{0.0, h};
      if (c.c3 != 0.0) {
        const double s = -c.c2 / (3.0 * c.c3);
        if (s > 0.0 && s < h) cand.push_back(s);
      }
      for (double s : cand) {
        gamma_ = std::max(gamma_, c.derivative(s));
        slope_min_ = std::min(slope_min_, c.derivative(s));
      }
    }
  }

  Locate locate(double t) const {
    if (t < ts_.front()) return {Where::left, 0};
    if (t >= ts_.back()) return {Where::right, 0};
    const auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
    return {Where::piece, static_cast<std::size_t>(it - ts_.begin()) - 1};
  }

  double raw_primitive(double t) const {
    const Locate loc = locate(t);
    switch (loc.where) {
      case Where::left: {
        const HermiteNode& a = nodes_.front();
        const double d = t - a.t;
        return a.value * d + 0.5 * a.slope * d * d;
      }
      case Where::right: {
        const HermiteNode& b = nodes_.back();
        const double d = t - b.t;
        return node_primitive_.back() + b.value * d + 0.5 * b.slope * d * d;
      }
      case Where::piece:
        return node_primitive_[loc.piece] + pieces_[loc.piece].integral(t - nodes_[loc.piece].t);
    }
    return 0.0;
  }

  void copy_metadata(const Nonlinearity& other) {
    knots_ = other.knots_;
    blend_margin_ = other.blend_margin_;
    truncation_ = other.truncation_;
    agreement_ = other.agreement_;
  }

  friend Nonlinearity truncate(const Nonlinearity& f, TruncationKind kind);

  std::vector<HermiteNode> nodes_;
  std::vector<double> ts_;
  std::vector<Cubic> pieces_;
  std::vector<double> node_primitive_;
  double primitive_offset_ = 0.0;
  double gamma_ = 0.0;
  double slope_min_ = 0.0;
  std::vector<Knot> knots_;
  double blend_margin_ = 1.0;
  std::optional<TruncationKind> truncation_;
  AgreementRegion agreement_;
};

inline constexpr double kAnchorZeroTol = 1e-10;

namespace detail {

inline void check_anchor(const Nonlinearity& f, double alpha) {
  if (std::abs(f(alpha)) > kAnchorZeroTol) {
    throw Error(ErrorCode::AnchorNotZero, "f(" + std::to_string(alpha) + ") = " + std::to_string(f(alpha)));
  }
  if (!(f.derivative(alpha) < 0.0)) {
    throw Error(ErrorCode::AnchorSlopeNonNegative,
                "f'(" + std::to_string(alpha) + ") = " + std::to_string(f.derivative(alpha)));
  }
}

inline HermiteNode anchor_node(const Nonlinearity& f, double alpha) { return {alpha, 0.0, f.derivative(alpha)}; }

}  // namespace detail

/// h(lambda, t) = lambda f'(inf) t + (1 - lambda) f(t).
inline double homotopy(const Nonlinearity& f, double lambda, double t) {
  if (f.slope_minus_inf() != f.slope_plus_inf()) {
    throw Error(ErrorCode::AsymmetricSlopes, "homotopy needs f'(-inf) = f'(+inf)");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda must lie in [0, 1]");
  return lambda * f.slope_plus_inf() * t + (1.0 - lambda) * f(t);
}

inline Nonlinearity truncate(const Nonlinearity& f, TruncationKind kind) {
  using Type = TruncationKind::Type;
  std::vector<HermiteNode> nodes;
  AgreementRegion region;
  switch (kind.type) {
    case Type::below: {
      detail::check_anchor(f, kind.alpha);
      for (const auto& n : f.nodes()) {
        if (n.t < kind.alpha) nodes.push_back(n);
      }
      nodes.push_back(detail::anchor_node(f, kind.alpha));
      region.hi = kind.alpha;
      break;
    }
    case Type::above: {
      detail::check_anchor(f, kind.alpha);
      nodes.push_back(detail::anchor_node(f, kind.alpha));
      for (const auto& n : f.nodes()) {
        if (n.t > kind.alpha) nodes.push_back(n);
      }
      region.lo = kind.alpha;
      break;
    }
    case Type::interval: {
      if (!(kind.alpha < kind.beta)) throw Error(ErrorCode::InvalidArgument, "interval truncation needs alpha < beta");
      detail::check_anchor(f, kind.alpha);
      detail::check_anchor(f, kind.beta);
      nodes.push_back(detail::anchor_node(f, kind.alpha));
      for (const auto& n : f.nodes()) {
        if (n.t > kind.alpha && n.t < kind.beta) nodes.push_back(n);
      }
      nodes.push_back(detail::anchor_node(f, kind.beta));
      region.lo = kind.alpha;
      region.hi = kind.beta;
      break;
    }
    case Type::homotopy: {
      const double s = f.slope_plus_inf();
      if (f.slope_minus_inf() != s) throw Error(ErrorCode::AsymmetricSlopes, "homotopy needs f'(-inf) = f'(+inf)");
      const double lam = kind.lambda;
      if (!(lam >= 0.0 && lam <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda must lie in [0, 1]");
      // Hermite interpolation reproduces the (cubic + linear) pieces exactly.
      for (const auto& n : f.nodes()) {
        nodes.push_back({n.t, lam * s * n.t + (1.0 - lam) * n.value, lam * s + (1.0 - lam) * n.slope});
      }
      region.empty = lam != 0.0;
      break;
    }
  }

  Nonlinearity out = Nonlinearity::from_nodes(std::move(nodes));
  out.blend_margin_ = f.blend_margin();
  out.truncation_ = kind;
  const AgreementRegion& parent = f.agreement();
  out.agreement_.lo = std::max(parent.lo, region.lo);
  out.agreement_.hi = std::min(parent.hi, region.hi);
  out.agreement_.empty = parent.empty || region.empty || out.agreement_.lo > out.agreement_.hi;
  for (const Knot& k : f.knots()) {
    if (out.agreement_.contains(k.t, k.t)) out.knots_.push_back(k);
  }
  return out;
}

inline Nonlinearity homotopy_nonlinearity(const Nonlinearity& f, double lambda) {
  return truncate(f, TruncationKind::homotopy(lambda));
}

struct ZeroInfo {
  enum class Type { minimum, crossing };

  double t = 0.0;
  double slope = 0.0;
  Type type = Type::crossing;
  int k_i = 0;            // #{lambda_j < f'(t)}
  bool resonant = false;  // f'(t) within tolerance of an eigenvalue
};

struct HypothesisReport {
  double slope_minus_inf = 0.0;
  double slope_plus_inf = 0.0;
  bool slopes_symmetric = false;
  bool nonresonant_at_infinity = false;
  int k = 0;
  std::vector<double> crossed_eigenvalues;
  std::vector<ZeroInfo> zeros;
  double gamma = 0.0;
  double lambda_min_y = std::numeric_limits<double>::infinity();
  bool reduction_applicable = false;
  bool five_solution_pattern = false;
  bool some_crossing_matches_k = false;
  /// 1 != sum over crossing zeros of (-1)^{k_i}; with the reduction this
  /// forces one more solution beyond the pipeline's named ones.
  bool extra_solution_condition = false;
  std::vector<std::string> diagnostics;
};

inline HypothesisReport check_hypotheses(const Nonlinearity& f, const SpectrumSlice& spectrum,
                                         double resonance_tol = kDefaultResonanceTol) {
  HypothesisReport r;
  r.slope_minus_inf = f.slope_minus_inf();
  r.slope_plus_inf = f.slope_plus_inf();
  r.slopes_symmetric = r.slope_minus_inf == r.slope_plus_inf;
  const bool minus_ok = spectrum.resonance_gap(r.slope_minus_inf) >= resonance_tol;
  const bool plus_ok = spectrum.resonance_gap(r.slope_plus_inf) >= resonance_tol;
  r.nonresonant_at_infinity = minus_ok && plus_ok;
  if (!minus_ok) r.diagnostics.push_back("f'(-inf) is resonant with a Neumann eigenvalue");
  if (!plus_ok) r.diagnostics.push_back("f'(+inf) is resonant with a Neumann eigenvalue");
  if (!r.slopes_symmetric) r.diagnostics.push_back("f'(-inf) != f'(+inf); global degree needs a single f'(inf)");

  r.k = spectrum.count_below(r.slope_plus_inf);
  for (const auto& p : spectrum.pairs()) {
    if (p.eigenvalue < r.slope_plus_inf) r.crossed_eigenvalues.push_back(p.eigenvalue);
  }
  if (r.k == spectrum.size()) r.diagnostics.push_back("f'(inf) lies above every retained eigenvalue; increase modes");
  if (spectrum.splits_cluster()) {
    r.diagnostics.push_back("the mode count cuts through a repeated eigenvalue; symmetry images may be missing");
  }

  for (double t : f.zeros()) {
    ZeroInfo z;
    z.t = t;
    z.slope = f.derivative(t);
    z.type = z.slope < 0.0 ? ZeroInfo::Type::minimum : ZeroInfo::Type::crossing;
    z.k_i = spectrum.count_below(z.slope);
    z.resonant = spectrum.resonance_gap(z.slope) < resonance_tol;
    if (z.resonant) r.diagnostics.push_back("zero at t = " + std::to_string(t) + " is degenerate (resonant slope)");
    r.zeros.push_back(z);
  }

  r.gamma = f.gamma();
  if (r.nonresonant_at_infinity && r.slopes_symmetric && r.slope_plus_inf > 0.0 && r.k < spectrum.size()) {
    r.lambda_min_y = split_spectrum(spectrum, r.slope_plus_inf, resonance_tol).lambda_min_y();
    r.reduction_applicable = r.gamma < r.lambda_min_y;
    if (!r.reduction_applicable) r.diagnostics.push_back("gamma >= lambda_min(Y): reduction does not apply");
  } else {
    r.diagnostics.push_back("reduction requires a single nonresonant positive f'(inf)");
  }

  if (r.zeros.size() == 5) {
    bool ok = true;
    for (std::size_t i = 0; i < 5; ++i) {
      const ZeroInfo& z = r.zeros[i];
      ok = ok && (i % 2 == 0 ? (z.type == ZeroInfo::Type::crossing && z.slope > 0.0)
                             : (z.type == ZeroInfo::Type::minimum));
    }
    r.five_solution_pattern = ok;
  }
  int parity_sum = 0;
  for (const ZeroInfo& z : r.zeros) {
    if (z.type != ZeroInfo::Type::crossing) continue;
    if (z.k_i == r.k) r.some_crossing_matches_k = true;
    parity_sum += (z.k_i % 2 == 0) ? 1 : -1;
  }
  r.extra_solution_condition = parity_sum != 1;
  if (!r.five_solution_pattern) r.diagnostics.push_back("zeros do not follow the a1 < m1 < a2 < m2 < a3 pattern");
  return r;
}

}  // namespace neumannlab

#pragma once

// Neumann eigenbasis on intervals and rectangles, the quadrature grid used to
// move between coefficient space and grid values, and the X (+) Y splitting of
// the spectrum at a reference slope.
//
// Indexing is 0-based throughout: eigenvalue 0 is the constant mode.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neumannlab/error.hpp"

namespace neumannlab {

enum class DomainKind { interval, rectangle };

struct Domain {
  DomainKind kind = DomainKind::interval;
  std::vector<double> lengths;   // one entry per axis
  std::vector<int> quad_points;  // grid nodes per axis, endpoints included

  static Domain interval(double length, int quad_points) {
    return Domain{DomainKind::interval, {length}, {quad_points}};
  }
  static Domain rectangle(double lx, double ly, int qx, int qy) {
    return Domain{DomainKind::rectangle, {lx, ly}, {qx, qy}};
  }

  std::size_t dimension() const { return kind == DomainKind::interval ? 1 : 2; }

  double measure() const {
    double m = 1.0;
    for (double l : lengths) m *= l;
    return m;
  }

  void validate() const {
    if (lengths.size() != dimension() || quad_points.size() != dimension()) {
      throw Error(ErrorCode::InvalidArgument, "domain axes do not match its kind");
    }
    for (double l : lengths) {
      if (!(l > 0.0) || !std::isfinite(l)) {
        throw Error(ErrorCode::InvalidArgument, "domain lengths must be positive");
      }
    }
    for (int q : quad_points) {
      if (q < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 quadrature nodes per axis");
    }
  }
};

struct EigenPair {
  int index = 0;
  double eigenvalue = 0.0;
  std::vector<int> mode;  // per-axis cosine wavenumbers
  double norm_constant = 1.0;

  /// Eigenfunction value at a point (one coordinate per axis).
  double operator()(std::span<const double> x, std::span<const double> lengths) const {
    double v = norm_constant;
    for (std::size_t a = 0; a < mode.size(); ++a) {
      v *= std::cos(mode[a] * std::numbers::pi * x[a] / lengths[a]);
    }
    return v;
  }
};

struct SpectralSplit {
  double slope = 0.0;
  int k = 0;  // dim X = #{j : lambda_j < slope}
  std::vector<int> x_indices;
  std::vector<int> y_indices;
};

class SpectrumSlice {
 public:
  SpectrumSlice(Domain domain, std::vector<EigenPair> pairs, bool splits_cluster = false)
      : domain_(std::move(domain)), pairs_(std::move(pairs)), splits_cluster_(splits_cluster) {}

  const Domain& domain() const { return domain_; }
  std::span<const EigenPair> pairs() const { return pairs_; }
  int size() const { return static_cast<int>(pairs_.size()); }
  double eigenvalue(int j) const { return pairs_.at(static_cast<std::size_t>(j)).eigenvalue; }

  Eigen::VectorXd eigenvalues() const {
    Eigen::VectorXd out(size());
    for (int j = 0; j < size(); ++j) out[j] = pairs_[static_cast<std::size_t>(j)].eigenvalue;
    return out;
  }

  /// H^1 weights 1 + lambda_j; the H^1 inner product of two fields is
  /// sum_j w_j a_j b_j.
  Eigen::VectorXd h1_weights() const { return eigenvalues().array() + 1.0; }

  /// Largest per-axis wavenumber + 1 (the resolution the grid must oversample).
  int modes_per_axis(std::size_t axis) const {
    int m = 0;
    for (const auto& p : pairs_) m = std::max(m, p.mode[axis]);
    return m + 1;
  }

  /// True when the first omitted eigenvalue equals the last retained one,
  /// so the slice breaks a degenerate eigenspace (and its symmetry).
  bool splits_cluster() const { return splits_cluster_; }

  bool is_split() const { return split_.has_value(); }
  const SpectralSplit& split() const {
    if (!split_) throw Error(ErrorCode::InvalidArgument, "spectrum has not been split");
    return *split_;
  }
  int k() const { return split().k; }
  const std::vector<int>& x_indices() const { return split().x_indices; }
  const std::vector<int>& y_indices() const { return split().y_indices; }

  double lambda_max_x() const {
    double m = -std::numeric_limits<double>::infinity();
    for (int j : x_indices()) m = std::max(m, eigenvalue(j));
    return m;
  }
  double lambda_min_y() const {
    double m = std::numeric_limits<double>::infinity();
    for (int j : y_indices()) m = std::min(m, eigenvalue(j));
    return m;
  }

  /// Nearest eigenvalue distance to `t` (used for resonance diagnostics).
  double resonance_gap(double t) const {
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& p : pairs_) gap = std::min(gap, std::abs(p.eigenvalue - t));
    return gap;
  }

  /// Count of eigenvalues strictly below t.
  int count_below(double t) const {
    return static_cast<int>(std::count_if(pairs_.begin(), pairs_.end(),
                                          [t](const EigenPair& p) { return p.eigenvalue < t; }));
  }

  SpectrumSlice with_split(SpectralSplit s) const {
    SpectrumSlice out = *this;
    out.split_ = std::move(s);
    return out;
  }

 private:
  Domain domain_;
  std::vector<EigenPair> pairs_;
  bool splits_cluster_ = false;
  std::optional<SpectralSplit> split_;
};

namespace detail {

inline double axis_norm(int m, double length) {
  return m == 0 ? 1.0 / std::sqrt(length) : std::sqrt(2.0 / length);
}

inline double axis_eigenvalue(int m, double length) {
  const double w = m * std::numbers::pi / length;
  return w * w;
}

}  // namespace detail

/// The N smallest Neumann eigenpairs, ascending; equal eigenvalues are
/// ordered lexicographically by mode tuple.
inline SpectrumSlice build_spectrum(const Domain& domain, int n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 modes");
  domain.validate();

  std::vector<EigenPair> pairs;
  bool splits_cluster = false;
  if (domain.kind == DomainKind::interval) {
    const double len = domain.lengths[0];
    for (int j = 0; j < n; ++j) {
      pairs.push_back({j, detail::axis_eigenvalue(j, len), {j}, detail::axis_norm(j, len)});
    }
  } else {
    const double lx = domain.lengths[0];
    const double ly = domain.lengths[1];
    // Any of the N smallest has per-axis wavenumber < N.
    for (int mx = 0; mx < n; ++mx) {
      for (int my = 0; my < n; ++my) {
        pairs.push_back({0, detail::axis_eigenvalue(mx, lx) + detail::axis_eigenvalue(my, ly), {mx, my},
                         detail::axis_norm(mx, lx) * detail::axis_norm(my, ly)});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const EigenPair& a, const EigenPair& b) {
      const double tol = 1e-12 * std::max(1.0, std::max(a.eigenvalue, b.eigenvalue));
      if (std::abs(a.eigenvalue - b.eigenvalue) > tol) return a.eigenvalue < b.eigenvalue;
      return a.mode < b.mode;
    });
    const auto cut = static_cast<std::size_t>(n);
    const double last = pairs[cut - 1].eigenvalue;
    splits_cluster = std::abs(pairs[cut].eigenvalue - last) <= 1e-12 * std::max(1.0, last);
    pairs.resize(cut);
    for (int j = 0; j < n; ++j) pairs[static_cast<std::size_t>(j)].index = j;
  }
  return SpectrumSlice(domain, std::move(pairs), splits_cluster);
}

inline constexpr double kDefaultResonanceTol = 1e-9;

inline SpectrumSlice split_spectrum(const SpectrumSlice& spectrum, double slope,
                                    double resonance_tol = kDefaultResonanceTol) {
  if (!(slope > 0.0) || !std::isfinite(slope)) {
    throw Error(ErrorCode::InvalidArgument, "split slope must be positive");
  }
  if (spectrum.resonance_gap(slope) < resonance_tol) {
    throw Error(ErrorCode::ResonantSlope, "slope " + std::to_string(slope) + " hits an eigenvalue");
  }
  SpectralSplit s;
  s.slope = slope;
  for (int j = 0; j < spectrum.size(); ++j) {
    (spectrum.eigenvalue(j) < slope ? s.x_indices : s.y_indices).push_back(j);
  }
  s.k = static_cast<int>(s.x_indices.size());
  return spectrum.with_split(std::move(s));
}

/// Coefficients against the L^2-orthonormal eigenbasis.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(Eigen::VectorXd coeffs) : coeffs_(std::move(coeffs)) {}
  static SpectralField zero(int n) { return SpectralField(Eigen::VectorXd::Zero(n)); }

  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Eigen::VectorXd& coeffs() { return coeffs_; }
  int size() const { return static_cast<int>(coeffs_.size()); }
  bool finite() const { return coeffs_.allFinite(); }

  /// ||u||^2_{H^1} = sum_j (1 + lambda_j) u_j^2.
  double h1_norm(const SpectrumSlice& s) const {
    return std::sqrt((s.h1_weights().array() * coeffs_.array().square()).sum());
  }

  friend SpectralField operator+(const SpectralField& a, const SpectralField& b) {
    return SpectralField(a.coeffs_ + b.coeffs_);
  }
  friend SpectralField operator-(const SpectralField& a, const SpectralField& b) {
    return SpectralField(a.coeffs_ - b.coeffs_);
  }
  friend SpectralField operator*(double c, const SpectralField& a) { return SpectralField(c * a.coeffs_); }

 private:
  Eigen::VectorXd coeffs_;
};

/// Uniform tensor grid with trapezoidal weights. Node i on an axis of length
/// L with M nodes sits at i L / (M - 1).
struct QuadratureGrid {
  std::vector<std::vector<double>> axes;
  std::vector<std::vector<double>> axis_weights;

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.size();
    return n;
  }

  static QuadratureGrid uniform(const Domain& domain) {
    QuadratureGrid g;
    for (std::size_t a = 0; a < domain.dimension(); ++a) {
      const int m = domain.quad_points[a];
      const double h = domain.lengths[a] / (m - 1);
      std::vector<double> x(static_cast<std::size_t>(m));
      std::vector<double> w(static_cast<std::size_t>(m), h);
      for (int i = 0; i < m; ++i) x[static_cast<std::size_t>(i)] = i * h;
      x.back() = domain.lengths[a];
      w.front() = w.back() = 0.5 * h;
      g.axes.push_back(std::move(x));
      g.axis_weights.push_back(std::move(w));
    }
    return g;
  }
};

/// Spectrum plus grid plus the sampled basis. Immutable after construction;
/// share it through shared_ptr<const SpectralSpace>.
class SpectralSpace {
 public:
  explicit SpectralSpace(SpectrumSlice spectrum)
      : spectrum_(std::move(spectrum)), grid_(QuadratureGrid::uniform(spectrum_.domain())) {
    const Domain& d = spectrum_.domain();
    for (std::size_t a = 0; a < d.dimension(); ++a) {
      if (d.quad_points[a] < 4 * spectrum_.modes_per_axis(a)) {
        throw Error(ErrorCode::GridMismatch, "quad_points must be at least 4x the modes per axis");
      }
    }
    const auto q = static_cast<Eigen::Index>(grid_.size());
    const int n = spectrum_.size();
    const std::size_t dim = d.dimension();
    basis_.resize(q, n);
    weights_.resize(q);
    points_.resize(q, static_cast<Eigen::Index>(dim));
    derivative_basis_.assign(dim, Eigen::MatrixXd(q, n));

    std::vector<std::size_t> idx(dim, 0);
    for (Eigen::Index row = 0; row < q; ++row) {
      double w = 1.0;
      std::vector<double> x(dim);
      for (std::size_t a = 0; a < dim; ++a) {
        x[a] = grid_.axes[a][idx[a]];
        w *= grid_.axis_weights[a][idx[a]];
        points_(row, static_cast<Eigen::Index>(a)) = x[a];
      }
      weights_[row] = w;
      for (int j = 0; j < n; ++j) {
        const EigenPair& p = spectrum_.pairs()[static_cast<std::size_t>(j)];
        basis_(row, j) = p(x, d.lengths);
        for (std::size_t a = 0; a < dim; ++a) {
          double v = p.norm_constant;
          for (std::size_t b = 0; b < dim; ++b) {
            const double wn = p.mode[b] * std::numbers::pi / d.lengths[b];
            v *= (a == b) ? -wn * std::sin(wn * x[b]) : std::cos(wn * x[b]);
          }
          derivative_basis_[a](row, j) = v;
        }
      }
      // Row-major walk: the last axis varies fastest.
      for (std::size_t a = dim; a-- > 0;) {
        if (++idx[a] < grid_.axes[a].size()) break;
        idx[a] = 0;
      }
    }
    weighted_basis_t_ = (basis_.array().colwise() * weights_.array()).matrix().transpose();
    h1_weights_ = spectrum_.h1_weights();
  }

  const SpectrumSlice& spectrum() const { return spectrum_; }
  const Domain& domain() const { return spectrum_.domain(); }
  const QuadratureGrid& grid() const { return grid_; }
  int size() const { return spectrum_.size(); }
  Eigen::Index grid_size() const { return basis_.rows(); }

  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::VectorXd& quadrature_weights() const { return weights_; }
  const Eigen::VectorXd& h1_weights() const { return h1_weights_; }
  const Eigen::MatrixXd& points() const { return points_; }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& coeffs) const {
    if (coeffs.size() != size()) throw Error(ErrorCode::GridMismatch, "coefficient count mismatch");
    return basis_ * coeffs;
  }
  Eigen::VectorXd evaluate(const SpectralField& u) const { return evaluate(u.coeffs()); }

  /// Partial derivatives of u on the grid, one vector per axis.
  std::vector<Eigen::VectorXd> evaluate_gradient(const SpectralField& u) const {
    if (u.size() != size()) throw Error(ErrorCode::GridMismatch, "coefficient count mismatch");
    std::vector<Eigen::VectorXd> out;
    for (const auto& d : derivative_basis_) out.push_back(d * u.coeffs());
    return out;
  }

  /// L^2 projection coefficients of grid values onto the basis.
  Eigen::VectorXd project_coeffs(const Eigen::VectorXd& values) const {
    if (values.size() != grid_size()) throw Error(ErrorCode::GridMismatch, "grid value count mismatch");
    return weighted_basis_t_ * values;
  }
  SpectralField project(const Eigen::VectorXd& values) const { return SpectralField(project_coeffs(values)); }

  /// Quadrature of grid values over the domain.
  double integrate(const Eigen::VectorXd& values) const {
    if (values.size() != grid_size()) throw Error(ErrorCode::GridMismatch, "grid value count mismatch");
    return weights_.dot(values);
  }

  /// Quadrature Gram matrix  B^T W B.
  Eigen::MatrixXd weighted_gram(const Eigen::VectorXd& grid_weight) const {
    return weighted_basis_t_ * (basis_.array().colwise() * grid_weight.array()).matrix();
  }

  /// Coefficient of a constant field c (c * sqrt|Omega| on the constant mode).
  SpectralField constant(double c) const {
    SpectralField u = SpectralField::zero(size());
    u.coeffs()[0] = c * std::sqrt(domain().measure());
    return u;
  }

  double h1_norm(const Eigen::VectorXd& c) const {
    return std::sqrt((h1_weights_.array() * c.array().square()).sum());
  }

  /// Sign patterns of the domain's reflection symmetries acting on
  /// coefficients (x -> L - x flips modes with odd wavenumber on that axis).
  std::vector<Eigen::VectorXd> reflections() const {
    const std::size_t dim = domain().dimension();
    std::vector<Eigen::VectorXd> out;
    for (unsigned mask = 1; mask < (1u << dim); ++mask) {
      Eigen::VectorXd s(size());
      for (int j = 0; j < size(); ++j) {
        int parity = 0;
        for (std::size_t a = 0; a < dim; ++a) {
          if (mask & (1u << a)) parity += spectrum_.pairs()[static_cast<std::size_t>(j)].mode[a];
        }
        s[j] = (parity % 2 == 0) ? 1.0 : -1.0;
      }
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  SpectrumSlice spectrum_;
  QuadratureGrid grid_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd weighted_basis_t_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd points_;
  std::vector<Eigen::MatrixXd> derivative_basis_;
  Eigen::VectorXd h1_weights_;
};

inline std::shared_ptr<const SpectralSpace> make_space(const Domain& domain, int modes) {
  return std::make_shared<const SpectralSpace>(build_spectrum(domain, modes));
}

}  // namespace neumannlab

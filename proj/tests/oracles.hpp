#pragma once

// Reference computations written without the library's spline, basis,
// quadrature or solvers. Tests compare the library against these.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Node {
  double t, value, slope;
};

/// Piecewise cubic Hermite interpolant in the textbook h00/h10/h01/h11 form,
/// continued linearly past the end nodes.
class HermiteF {
 public:
  explicit HermiteF(std::vector<Node> nodes) : n_(std::move(nodes)) {}

  /// Zeros `knots` (t, slope) joined to slope `s_inf` tails over `margin`.
  static HermiteF from_knots(const std::vector<std::pair<double, double>>& knots, double s_inf, double margin) {
    std::vector<Node> n;
    n.push_back({knots.front().first - margin, -s_inf * margin, s_inf});
    for (auto [t, s] : knots) n.push_back({t, 0.0, s});
    n.push_back({knots.back().first + margin, s_inf * margin, s_inf});
    return HermiteF(std::move(n));
  }

  double operator()(double t) const {
    if (t <= n_.front().t) return n_.front().value + n_.front().slope * (t - n_.front().t);
    if (t >= n_.back().t) return n_.back().value + n_.back().slope * (t - n_.back().t);
    const std::size_t i = segment(t);
    const Node& a = n_[i];
    const Node& b = n_[i + 1];
    const double h = b.t - a.t;
    const double s = (t - a.t) / h;
    const double h00 = 2 * s * s * s - 3 * s * s + 1;
    const double h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s;
    const double h11 = s * s * s - s * s;
    return h00 * a.value + h10 * h * a.slope + h01 * b.value + h11 * h * b.slope;
  }

  double derivative(double t) const {
    if (t <= n_.front().t) return n_.front().slope;
    if (t >= n_.back().t) return n_.back().slope;
    const std::size_t i = segment(t);
    const Node& a = n_[i];
    const Node& b = n_[i + 1];
    const double h = b.t - a.t;
    const double s = (t - a.t) / h;
    const double d00 = 6 * s * s - 6 * s;
    const double d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -6 * s * s + 6 * s;
    const double d11 = 3 * s * s - 2 * s;
    return (d00 * a.value + d01 * b.value) / h + d10 * a.slope + d11 * b.slope;
  }

  /// int_0^t f by Simpson's rule on each cubic (or linear) piece, exact.
  double primitive(double t) const {
    if (t < 0.0) return -integrate(t, 0.0);
    return integrate(0.0, t);
  }

  const std::vector<Node>& nodes() const { return n_; }

 private:
  std::size_t segment(double t) const {
    std::size_t i = 0;
    while (i + 2 < n_.size() && t > n_[i + 1].t) ++i;
    return i;
  }

  double simpson(double a, double b) const {
    return (b - a) / 6.0 * ((*this)(a) + 4.0 * (*this)(0.5 * (a + b)) + (*this)(b));
  }

  double integrate(double a, double b) const {
    std::vector<double> cuts{a};
    for (const Node& n : n_) {
      if (n.t > a && n.t < b) cuts.push_back(n.t);
    }
    cuts.push_back(b);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += simpson(cuts[i], cuts[i + 1]);
    return s;
  }

  std::vector<Node> n_;
};

/// Truncations rebuilt from the knot data: keep the nodes on one side of an
/// anchor zero and continue linearly with the anchor slope.
inline HermiteF truncate_below(const HermiteF& f, double alpha) {
  std::vector<Node> n;
  for (const Node& x : f.nodes()) {
    if (x.t < alpha) n.push_back(x);
  }
  n.push_back({alpha, 0.0, f.derivative(alpha)});
  return HermiteF(std::move(n));
}

inline HermiteF truncate_above(const HermiteF& f, double alpha) {
  std::vector<Node> n{{alpha, 0.0, f.derivative(alpha)}};
  for (const Node& x : f.nodes()) {
    if (x.t > alpha) n.push_back(x);
  }
  return HermiteF(std::move(n));
}

inline HermiteF truncate_between(const HermiteF& f, double alpha, double beta) {
  std::vector<Node> n{{alpha, 0.0, f.derivative(alpha)}};
  for (const Node& x : f.nodes()) {
    if (x.t > alpha && x.t < beta) n.push_back(x);
  }
  n.push_back({beta, 0.0, f.derivative(beta)});
  return HermiteF(std::move(n));
}

inline HermiteF ref5() {
  return HermiteF::from_knots({{-2, 2.5}, {-1, -3}, {0, 2.5}, {1, -3}, {2, 2.5}}, 2.5, 1.0);
}

/// Neumann eigenvalues of a rectangle by enumeration, ascending, ties in
/// lexicographic mode order.
inline std::vector<std::pair<double, std::array<int, 2>>> rectangle_spectrum(double lx, double ly, int n) {
  std::vector<std::pair<double, std::array<int, 2>>> all;
  for (int a = 0; a <= n; ++a) {
    for (int b = 0; b <= n; ++b) {
      const double v = std::pow(a * std::numbers::pi / lx, 2) + std::pow(b * std::numbers::pi / ly, 2);
      all.push_back({v, {a, b}});
    }
  }
  std::sort(all.begin(), all.end(), [](const auto& p, const auto& q) {
    if (std::abs(p.first - q.first) > 1e-9) return p.first < q.first;
    return p.second < q.second;
  });
  all.resize(static_cast<std::size_t>(n));
  return all;
}

/// Cosine Galerkin energy on [0, L] with composite 5-point Gauss-Legendre
/// quadrature. Coordinates are the L^2-orthonormal cosine coefficients.
class Galerkin {
 public:
  Galerkin(HermiteF f, double length, int modes, int panels = 96) : f_(std::move(f)), len_(length), n_(modes) {
    static constexpr std::array<double, 5> gx{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                              0.9061798459386640};
    static constexpr std::array<double, 5> gw{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                              0.4786286704993665, 0.2369268850561891};
    const double h = length / panels;
    for (int p = 0; p < panels; ++p) {
      for (std::size_t i = 0; i < 5; ++i) {
        x_.push_back((p + 0.5) * h + 0.5 * h * gx[i]);
        w_.push_back(0.5 * h * gw[i]);
      }
    }
    phi_.resize(static_cast<Eigen::Index>(x_.size()), modes);
    lambda_.resize(modes);
    for (int j = 0; j < modes; ++j) {
      const double k = j * std::numbers::pi / length;
      lambda_[j] = k * k;
      const double c = j == 0 ? std::sqrt(1.0 / length) : std::sqrt(2.0 / length);
      for (std::size_t q = 0; q < x_.size(); ++q) phi_(static_cast<Eigen::Index>(q), j) = c * std::cos(k * x_[q]);
    }
  }

  int size() const { return n_; }
  const HermiteF& f() const { return f_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }

  double value(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd u = phi_ * c;
    double s = 0.5 * (lambda_.array() * c.array().square()).sum();
    for (Eigen::Index q = 0; q < u.size(); ++q) s -= w_[static_cast<std::size_t>(q)] * f_.primitive(u[q]);
    return s;
  }

  /// Euclidean gradient: lambda_j c_j - int f(u) phi_j.
  Eigen::VectorXd gradient(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd u = phi_ * c;
    Eigen::VectorXd fu(u.size());
    for (Eigen::Index q = 0; q < u.size(); ++q) fu[q] = w_[static_cast<std::size_t>(q)] * f_(u[q]);
    return (lambda_.array() * c.array()).matrix() - phi_.transpose() * fu;
  }

  /// Central differences of the gradient.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& c, double h = 1e-6) const {
    Eigen::MatrixXd jm(n_, n_);
    for (int i = 0; i < n_; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
      e[i] = h;
      jm.col(i) = (gradient(c + e) - gradient(c - e)) / (2.0 * h);
    }
    return 0.5 * (jm + jm.transpose());
  }

  std::pair<double, double> range(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd u = phi_ * c;
    return {u.minCoeff(), u.maxCoeff()};
  }

 private:
  HermiteF f_;
  double len_;
  int n_;
  std::vector<double> x_, w_;
  Eigen::MatrixXd phi_;
  Eigen::VectorXd lambda_;
};

struct Root {
  Eigen::VectorXd c;
  double energy = 0.0;
  double min_abs_eig = 0.0;
  int index = 0;
  bool converged = false;
};

/// Damped Newton on the gradient with a finite-difference Jacobian.
inline Root newton(const Galerkin& g, Eigen::VectorXd c, int max_iters = 60, double tol = 1e-10) {
  Root r;
  double res = g.gradient(c).norm();
  for (int it = 0; it < max_iters && res > tol; ++it) {
    const Eigen::VectorXd gr = g.gradient(c);
    const Eigen::VectorXd d = g.jacobian(c).completeOrthogonalDecomposition().solve(-gr);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      const Eigen::VectorXd trial = c + t * d;
      const double rt = g.gradient(trial).norm();
      if (rt < res) {
        c = trial;
        res = rt;
        moved = true;
        break;
      }
    }
    if (!moved || c.norm() > 1e3) break;
  }
  r.c = c;
  r.converged = res <= tol;
  r.energy = g.value(c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.jacobian(c));
  r.min_abs_eig = es.eigenvalues().cwiseAbs().minCoeff();
  r.index = static_cast<int>((es.eigenvalues().array() < 0.0).count());
  return r;
}

/// Newton from every node of a uniform grid on [-box, box]^n; distinct
/// converged roots.
inline std::vector<Root> enumerate_critical_points(const Galerkin& g, double box, int per_axis, double merge = 1e-6) {
  std::vector<Root> out;
  const int n = g.size();
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (;;) {
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = -box + 2.0 * box * idx[static_cast<std::size_t>(i)] / (per_axis - 1);
    Root r = newton(g, c);
    if (r.converged) {
      const bool seen = std::any_of(out.begin(), out.end(), [&](const Root& q) { return (q.c - r.c).norm() < merge; });
      if (!seen) out.push_back(std::move(r));
    }
    int a = 0;
    while (a < n && ++idx[static_cast<std::size_t>(a)] == per_axis) idx[static_cast<std::size_t>(a++)] = 0;
    if (a == n) break;
  }
  std::sort(out.begin(), out.end(), [](const Root& a, const Root& b) { return a.energy < b.energy; });
  return out;
}

/// Minimax level between grid points a and b over the box
/// [lo0, hi0] x [lo1, hi1]: the lowest level at which the sublevel set
/// connects them (union-find over cells added in energy order).
inline double sublevel_minimax(const Galerkin& g, std::array<double, 2> lo, std::array<double, 2> hi, int res,
                               const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const auto cell = [&](const Eigen::Vector2d& p) {
    const int i = static_cast<int>(std::lround((p[0] - lo[0]) / (hi[0] - lo[0]) * (res - 1)));
    const int j = static_cast<int>(std::lround((p[1] - lo[1]) / (hi[1] - lo[1]) * (res - 1)));
    return i * res + j;
  };
  std::vector<double> e(static_cast<std::size_t>(res * res));
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      Eigen::VectorXd c(2);
      c << lo[0] + (hi[0] - lo[0]) * i / (res - 1), lo[1] + (hi[1] - lo[1]) * j / (res - 1);
      e[static_cast<std::size_t>(i * res + j)] = g.value(c);
    }
  }
  std::vector<int> order(e.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int p, int q) { return e[static_cast<std::size_t>(p)] < e[static_cast<std::size_t>(q)]; });
  std::vector<int> parent(e.size(), -1);
  const auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  const int ca = cell(a);
  const int cb = cell(b);
  for (int p : order) {
    parent[static_cast<std::size_t>(p)] = p;
    const int i = p / res;
    const int j = p % res;
    const std::array<std::pair<int, int>, 4> nb{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
    for (auto [x, y] : nb) {
      if (x < 0 || y < 0 || x >= res || y >= res) continue;
      const int q = x * res + y;
      if (parent[static_cast<std::size_t>(q)] < 0) continue;
      parent[static_cast<std::size_t>(find(q))] = find(p);
    }
    if (parent[static_cast<std::size_t>(ca)] >= 0 && parent[static_cast<std::size_t>(cb)] >= 0 && find(ca) == find(cb)) {
      return e[static_cast<std::size_t>(p)];
    }
  }
  return std::numeric_limits<double>::infinity();
}

/// Critical points of J restricted to constants, c -> -|Omega| F(c), by a
/// sign scan of f followed by bisection.
inline std::vector<std::pair<double, double>> constant_critical_points(const HermiteF& f, double measure, double lo,
                                                                       double hi, int samples = 20001) {
  std::vector<std::pair<double, double>> out;
  double prev_t = lo;
  double prev_v = f(lo);
  for (int i = 1; i < samples; ++i) {
    const double t = lo + (hi - lo) * i / (samples - 1);
    const double v = f(t);
    if (prev_v == 0.0 || prev_v * v < 0.0) {
      double a = prev_t;
      double b = t;
      if (prev_v == 0.0) b = a;
      for (int k = 0; k < 200 && b - a > 1e-15; ++k) {
        const double m = 0.5 * (a + b);
        if ((f(a) < 0.0) == (f(m) < 0.0)) a = m; else b = m;
      }
      const double z = 0.5 * (a + b);
      out.push_back({z, -measure * f.primitive(z)});
    }
    prev_t = t;
    prev_v = v;
  }
  return out;
}

/// min over the coordinates `free` of the Galerkin energy with the others
/// fixed at c, by damped Newton on the free block.
inline double reduced_energy(const Galerkin& g, Eigen::VectorXd c, const std::vector<int>& free, Eigen::VectorXd* arg = nullptr) {
  const auto nf = static_cast<Eigen::Index>(free.size());
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd gr = g.gradient(c);
    const Eigen::MatrixXd jm = g.jacobian(c);
    Eigen::VectorXd gf(nf);
    Eigen::MatrixXd jf(nf, nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
      gf[r] = gr[free[static_cast<std::size_t>(r)]];
      for (Eigen::Index q = 0; q < nf; ++q) jf(r, q) = jm(free[static_cast<std::size_t>(r)], free[static_cast<std::size_t>(q)]);
    }
    if (gf.norm() < 1e-11) break;
    const Eigen::VectorXd d = jf.ldlt().solve(-gf);
    double t = 1.0;
    const double e0 = g.value(c);
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      Eigen::VectorXd trial = c;
      for (Eigen::Index r = 0; r < nf; ++r) trial[free[static_cast<std::size_t>(r)]] += t * d[r];
      if (g.value(trial) <= e0 + 1e-14 * (1.0 + std::abs(e0))) {
        c = trial;
        break;
      }
    }
  }
  if (arg) *arg = c;
  return g.value(c);
}

}  // namespace oracle

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neumannlab/energy.hpp"
#include "neumannlab/error.hpp"
#include "neumannlab/morse.hpp"
#include "neumannlab/parallel.hpp"
#include "neumannlab/solvers.hpp"

namespace neumannlab {

struct ReductionConfig {
  double inner_tol = 1e-11;     // Y-projected H^1 residual for psi
  double newton_switch = 1e-4;  // gradient descent -> Newton on the Y block
  int max_inner_iters = 5000;
  double ascent_tol = 1e-8;
  int ascent_max_iters = 500;
  std::optional<double> grid_radius;  // overrides R for seeding
  int max_grid_points = 40000;
  int max_grid_k = 4;
  int random_seeds = 200;  // used when k exceeds max_grid_k
  int threads = 1;
};

/// Splits coefficient space at f'(inf) into X (eigenvalues below) and Y,
/// and carries the strong-convexity modulus m of J on Y.
class ReductionContext {
 public:
  ReductionContext(EnergyFunctional j, ReductionConfig cfg = {}, double resonance_tol = kDefaultResonanceTol)
      : j_(std::move(j)), cfg_(std::move(cfg)), split_(checked_split(j_, resonance_tol)) {
    const Nonlinearity& f = j_.nonlinearity();
    if (split_.y_indices().empty()) {
      throw Error(ErrorCode::ReductionInapplicable, "f'(inf) lies above every retained eigenvalue");
    }
    gamma_ = f.gamma();
    lambda_min_y_ = split_.lambda_min_y();
    if (!(gamma_ < lambda_min_y_)) {
      throw Error(ErrorCode::ReductionInapplicable, "gamma >= lambda_min(Y)");
    }
    modulus_ = (lambda_min_y_ - gamma_) / (1.0 + lambda_min_y_);
    // Largest eigenvalue of the Y block of I - T((f'+1).) in the H^1 metric.
    lipschitz_ = 1.0 + std::max(0.0, -(f.slope_lower_bound() + 1.0)) / (1.0 + lambda_min_y_);
    for (int i : split_.x_indices()) x_idx_.push_back(i);
    for (int i : split_.y_indices()) y_idx_.push_back(i);
  }

  const EnergyFunctional& functional() const { return j_; }
  const ReductionConfig& config() const { return cfg_; }
  const SpectrumSlice& spectrum() const { return split_; }
  int k() const { return static_cast<int>(x_idx_.size()); }
  const std::vector<Eigen::Index>& x_indices() const { return x_idx_; }
  const std::vector<Eigen::Index>& y_indices() const { return y_idx_; }
  double modulus() const { return modulus_; }
  double lipschitz() const { return lipschitz_; }
  double gamma() const { return gamma_; }
  double lambda_min_y() const { return lambda_min_y_; }

  Eigen::VectorXd project_x(const Eigen::VectorXd& u) const { return masked(u, x_idx_); }
  Eigen::VectorXd project_y(const Eigen::VectorXd& u) const { return masked(u, y_idx_); }

  /// Full-length vector from k X-coordinates.
  Eigen::VectorXd embed_x(const Eigen::VectorXd& xk) const {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(j_.size());
    for (std::size_t i = 0; i < x_idx_.size(); ++i) u[x_idx_[i]] = xk[static_cast<Eigen::Index>(i)];
    return u;
  }
  Eigen::VectorXd restrict_x(const Eigen::VectorXd& u) const {
    Eigen::VectorXd xk(k());
    for (std::size_t i = 0; i < x_idx_.size(); ++i) xk[static_cast<Eigen::Index>(i)] = u[x_idx_[i]];
    return xk;
  }

 private:
  static SpectrumSlice checked_split(const EnergyFunctional& j, double tol) {
    const Nonlinearity& f = j.nonlinearity();
    if (f.slope_minus_inf() != f.slope_plus_inf()) {
      throw Error(ErrorCode::AsymmetricSlopes, "reduction needs f'(-inf) = f'(+inf)");
    }
    return split_spectrum(j.space().spectrum(), f.slope_plus_inf(), tol);
  }

  Eigen::VectorXd masked(const Eigen::VectorXd& u, const std::vector<Eigen::Index>& idx) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (Eigen::Index i : idx) out[i] = u[i];
    return out;
  }

  EnergyFunctional j_;
  ReductionConfig cfg_;
  SpectrumSlice split_;
  std::vector<Eigen::Index> x_idx_;
  std::vector<Eigen::Index> y_idx_;
  double gamma_ = 0.0;
  double lambda_min_y_ = 0.0;
  double modulus_ = 0.0;
  double lipschitz_ = 1.0;
};

/// psi(x): the unique minimizer over Y of y -> J(x + y). Gradient descent
/// with step 2/(m + Lambda), then Newton on the Y block. Returns a
/// full-length vector supported on Y.
inline Eigen::VectorXd psi(const ReductionContext& ctx, const Eigen::VectorXd& x,
                           const std::optional<Eigen::VectorXd>& y_guess = std::nullopt, int* iterations = nullptr) {
  const EnergyFunctional& j = ctx.functional();
  const ReductionConfig& cfg = ctx.config();
  const Eigen::VectorXd& w = j.weights();
  const auto& yi = ctx.y_indices();
  const auto ny = static_cast<Eigen::Index>(yi.size());
  const Eigen::VectorXd base = ctx.project_x(x);
  Eigen::VectorXd y = y_guess ? ctx.project_y(*y_guess) : Eigen::VectorXd::Zero(j.size());

  Eigen::VectorXd g = ctx.project_y(j.gradient(base + y));
  double res = metric_norm(w, g);
  const double tau = 2.0 / (ctx.modulus() + ctx.lipschitz());
  const double m = ctx.modulus();
  int it = 0;
  for (; res > cfg.inner_tol; ++it) {
    if (it >= cfg.max_inner_iters) throw Error(ErrorCode::MaxItersExceeded, "psi did not converge");
    Eigen::VectorXd step;
    bool newton = false;
    if (res < cfg.newton_switch) {
      const Eigen::MatrixXd h = j.hessian(base + y);
      Eigen::MatrixXd a(ny, ny);
      Eigen::VectorXd rhs(ny);
      for (Eigen::Index r = 0; r < ny; ++r) {
        rhs[r] = -w[yi[r]] * g[yi[r]];
        for (Eigen::Index c = 0; c < ny; ++c) a(r, c) = w[yi[r]] * h(yi[r], yi[c]);
      }
      a = 0.5 * (a + a.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd d = llt.solve(rhs);
        step = Eigen::VectorXd::Zero(j.size());
        for (Eigen::Index r = 0; r < ny; ++r) step[yi[r]] = d[r];
        newton = true;
      }
    }
    if (!newton) step = -tau * g;
    Eigen::VectorXd y_new = y + step;
    Eigen::VectorXd g_new = ctx.project_y(j.gradient(base + y_new));
    double res_new = metric_norm(w, g_new);
    if (newton && !(res_new < res)) {
      y_new = y - tau * g;
      g_new = ctx.project_y(j.gradient(base + y_new));
      res_new = metric_norm(w, g_new);
      step = y_new - y;
    }
    const double mono = metric_dot(w, g_new - g, step);
    const double sq = metric_dot(w, step, step);
    if (mono < m * sq - 1e-10 * std::max(1.0, sq)) {
      throw Error(ErrorCode::ModulusViolated, "J is not m-strongly convex along Y at the sampled pair");
    }
    y = std::move(y_new);
    g = std::move(g_new);
    res = res_new;
  }
  if (iterations) *iterations = it;
  return y;
}

inline double reduced_value(const ReductionContext& ctx, const Eigen::VectorXd& x,
                            const std::optional<Eigen::VectorXd>& y_guess = std::nullopt) {
  const Eigen::VectorXd base = ctx.project_x(x);
  return ctx.functional().value(base + psi(ctx, base, y_guess));
}

/// H^1 representer of DJ~(x) on X; the partial derivative along coefficient
/// x_j is w_j times entry j.
inline Eigen::VectorXd reduced_gradient(const ReductionContext& ctx, const Eigen::VectorXd& x,
                                        const std::optional<Eigen::VectorXd>& y_guess = std::nullopt) {
  const Eigen::VectorXd base = ctx.project_x(x);
  return ctx.project_x(ctx.functional().gradient(base + psi(ctx, base, y_guess)));
}

struct ReductionResult {
  CriticalPointRecord record;
  Eigen::VectorXd x;      // X part of u10 (full length)
  double reduced_max = 0.0;
  double grid_max = -std::numeric_limits<double>::infinity();
  double seed_radius = 0.0;
  int grid_points = 0;
  int ascents = 0;
  std::vector<std::string> warnings;
};

namespace detail {

struct AscentResult {
  Eigen::VectorXd xk;
  Eigen::VectorXd y;
  double value = -std::numeric_limits<double>::infinity();
  bool ok = false;
};

/// BFGS on -J~ in the k X-coordinates with Armijo backtracking.
inline AscentResult ascend_reduced(const ReductionContext& ctx, Eigen::VectorXd xk, Eigen::VectorXd y) {
  const ReductionConfig& cfg = ctx.config();
  const EnergyFunctional& j = ctx.functional();
  const Eigen::VectorXd wx = ctx.restrict_x(j.weights());
  const int k = ctx.k();

  auto eval = [&](const Eigen::VectorXd& xs, Eigen::VectorXd& ys, Eigen::VectorXd& grad) {
    const Eigen::VectorXd x = ctx.embed_x(xs);
    ys = psi(ctx, x, ys);
    const Eigen::VectorXd u = x + ys;
    grad = -wx.cwiseProduct(ctx.restrict_x(j.gradient(u)));  // gradient of -J~ in coordinates
    return -j.value(u);
  };

  AscentResult out;
  try {
    Eigen::VectorXd grad;
    double phi = eval(xk, y, grad);
    Eigen::MatrixXd hinv = wx.cwiseInverse().asDiagonal();
    for (int it = 0; it < cfg.ascent_max_iters; ++it) {
      const double res = std::sqrt((grad.array().square() / wx.array()).sum());
      if (res <= cfg.ascent_tol) break;
      Eigen::VectorXd dir = -hinv * grad;
      if (grad.dot(dir) >= 0.0) {
        hinv = wx.cwiseInverse().asDiagonal();
        dir = -hinv * grad;
      }
      double t = 1.0;
      Eigen::VectorXd y_trial = y;
      Eigen::VectorXd g_trial;
      Eigen::VectorXd x_trial;
      double phi_trial = 0.0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
        x_trial = xk + t * dir;
        y_trial = y;
        phi_trial = eval(x_trial, y_trial, g_trial);
        if (phi_trial <= phi + 1e-4 * t * grad.dot(dir)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const Eigen::VectorXd s = x_trial - xk;
      const Eigen::VectorXd yy = g_trial - grad;
      const double sy = s.dot(yy);
      if (sy > 1e-14 * s.norm() * yy.norm()) {
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
        hinv = (id - rho * s * yy.transpose()) * hinv * (id - rho * yy * s.transpose()) + rho * s * s.transpose();
      }
      xk = x_trial;
      y = y_trial;
      grad = g_trial;
      phi = phi_trial;
    }
    out.xk = xk;
    out.y = y;
    out.value = -phi;
    out.ok = true;
  } catch (const Error&) {
    out.ok = false;
  }
  return out;
}

}  // namespace detail

/// Global maximizer of J~ over X by grid seeding plus quasi-Newton ascent,
/// finished by Newton on the full gradient. `seeds` are full-length fields
/// whose X parts join the grid's local maxima as ascent starts.
inline ReductionResult maximize_reduced(const ReductionContext& ctx, const SolverConfig& scfg, double radius,
                                        const std::vector<Eigen::VectorXd>& seeds = {}) {
  const ReductionConfig& cfg = ctx.config();
  const EnergyFunctional& j = ctx.functional();
  const int k = ctx.k();
  ReductionResult out;
  out.seed_radius = cfg.grid_radius.value_or(radius);
  const double rad = out.seed_radius;

  std::vector<Eigen::VectorXd> starts;  // k-dimensional
  if (k == 0) {
    starts.emplace_back(0);
  } else if (k <= cfg.max_grid_k) {
    int per_axis = 2 * static_cast<int>(std::ceil(rad)) + 1;
    per_axis = std::max(per_axis, 3);
    while (std::pow(per_axis, k) > cfg.max_grid_points && per_axis > 3) per_axis -= 2;
    if (std::pow(2 * static_cast<int>(std::ceil(rad)) + 1, k) > cfg.max_grid_points) {
      out.warnings.push_back("seed grid thinned to " + std::to_string(per_axis) + " points per axis");
    }
    std::size_t total = 1;
    for (int a = 0; a < k; ++a) total *= static_cast<std::size_t>(per_axis);
    out.grid_points = static_cast<int>(total);
    std::vector<Eigen::VectorXd> pts(total);
    std::vector<double> vals(total, -std::numeric_limits<double>::infinity());
    std::vector<Eigen::VectorXd> ys(total);
    auto coord = [&](std::size_t flat) {
      Eigen::VectorXd xk(k);
      for (int a = 0; a < k; ++a) {
        const auto ia = static_cast<int>(flat % static_cast<std::size_t>(per_axis));
        flat /= static_cast<std::size_t>(per_axis);
        xk[a] = per_axis == 1 ? 0.0 : -rad + 2.0 * rad * ia / (per_axis - 1);
      }
      return xk;
    };
    parallel_for(total, cfg.threads, [&](std::size_t i) {
      pts[i] = coord(i);
      try {
        const Eigen::VectorXd x = ctx.embed_x(pts[i]);
        ys[i] = psi(ctx, x);
        vals[i] = j.value(x + ys[i]);
      } catch (const Error&) {
      }
    });
    for (double v : vals) out.grid_max = std::max(out.grid_max, v);
    // Discrete local maxima over the 3^k - 1 neighbours.
    for (std::size_t i = 0; i < total; ++i) {
      if (!std::isfinite(vals[i])) continue;
      std::vector<int> idx(static_cast<std::size_t>(k));
      std::size_t rest = i;
      for (int a = 0; a < k; ++a) {
        idx[static_cast<std::size_t>(a)] = static_cast<int>(rest % static_cast<std::size_t>(per_axis));
        rest /= static_cast<std::size_t>(per_axis);
      }
      bool is_max = true;
      const int nb = static_cast<int>(std::pow(3, k));
      for (int c = 0; c < nb && is_max; ++c) {
        int code = c;
        std::size_t flat = 0;
        std::size_t stride = 1;
        bool inside = true;
        bool self = true;
        for (int a = 0; a < k; ++a) {
          const int d = code % 3 - 1;
          code /= 3;
          if (d != 0) self = false;
          const int q = idx[static_cast<std::size_t>(a)] + d;
          if (q < 0 || q >= per_axis) inside = false;
          flat += static_cast<std::size_t>(q) * stride;
          stride *= static_cast<std::size_t>(per_axis);
        }
        if (self || !inside) continue;
        if (vals[flat] > vals[i]) is_max = false;
      }
      if (is_max) starts.push_back(pts[i]);
    }
  } else {
    out.warnings.push_back("k exceeds the grid limit; random seeding");
    std::mt19937_64 rng(scfg.rng_seed);
    std::uniform_real_distribution<double> unif(-rad, rad);
    for (int i = 0; i < cfg.random_seeds; ++i) {
      Eigen::VectorXd xk(k);
      for (int a = 0; a < k; ++a) xk[a] = unif(rng);
      starts.push_back(xk);
    }
  }
  for (const auto& s : seeds) starts.push_back(ctx.restrict_x(s));

  std::vector<detail::AscentResult> asc(starts.size());
  parallel_for(starts.size(), cfg.threads, [&](std::size_t i) {
    asc[i] = detail::ascend_reduced(ctx, starts[i], Eigen::VectorXd::Zero(j.size()));
  });
  out.ascents = static_cast<int>(starts.size());

  // Best value wins; ties go to the lexicographically smallest X part.
  const detail::AscentResult* best = nullptr;
  for (const auto& a : asc) {
    if (!a.ok) continue;
    if (!best || a.value > best->value + 1e-12 ||
        (std::abs(a.value - best->value) <= 1e-12 &&
         std::lexicographical_compare(a.xk.data(), a.xk.data() + a.xk.size(), best->xk.data(),
                                      best->xk.data() + best->xk.size()))) {
      best = &a;
    }
  }
  if (!best) throw Error(ErrorCode::MaxItersExceeded, "no reduced ascent converged");

  int its = 0;
  const Eigen::VectorXd u = newton_refine(j, ctx.embed_x(best->xk) + best->y, scfg, &its);
  out.record = make_record(j, u, Classification::reduction_max, "reduction", scfg.degeneracy_tol);
  out.record.iterations = its;
  out.x = ctx.project_x(u);
  out.reduced_max = out.record.energy;
  if (out.record.degenerate) {
    out.record.warnings.push_back("reduction maximizer is degenerate");
  } else if (out.record.morse_index != k) {
    out.record.warnings.push_back("reduction maximizer has Morse index " + std::to_string(out.record.morse_index) +
                                  ", expected " + std::to_string(k));
  }
  for (const auto& w : out.warnings) out.record.warnings.push_back(w);
  return out;
}

struct DirectionCheck {
  int index = 0;           // basis index in X
  bool low_block = false;  // lambda_j < f'(alpha): expect a decrease
  double second_difference = 0.0;
  double expected = 0.0;  // Schur-complement curvature along the coefficient
  bool pass = false;
};

struct MaxMinReport {
  double alpha = 0.0;
  int ell = 0;
  double epsilon = 0.0;
  std::vector<DirectionCheck> directions;
  bool pass = true;
};

/// Samples J~(alpha + eps e_j) along each X direction at a zero alpha of f
/// with 0 <= ell < k eigenvalues below f'(alpha).
inline MaxMinReport local_max_min_at_constant(const ReductionContext& ctx, double alpha, std::optional<int> ell = {},
                                              double epsilon = 1e-3) {
  const EnergyFunctional& j = ctx.functional();
  const Nonlinearity& f = j.nonlinearity();
  if (std::abs(f(alpha)) > kAnchorZeroTol) throw Error(ErrorCode::InvalidArgument, "alpha is not a zero of f");
  const double s = f.derivative(alpha);
  const SpectrumSlice& sp = ctx.spectrum();
  if (sp.resonance_gap(s) < 1e-6) throw Error(ErrorCode::ResonantSlope, "f'(alpha) is resonant");
  const int l = sp.count_below(s);
  if (ell && *ell != l) throw Error(ErrorCode::InvalidArgument, "ell does not match f'(alpha)");
  if (l >= ctx.k()) throw Error(ErrorCode::InvalidArgument, "need ell < k");

  MaxMinReport rep;
  rep.alpha = alpha;
  rep.ell = l;
  rep.epsilon = epsilon;
  const Eigen::VectorXd c = j.space().constant(alpha).coeffs();
  const Eigen::VectorXd w = j.weights();
  // Reduced Hessian (coefficients): D_XX H_XX - D_XY H_XY (D_YY H_YY)^{-1} D_YX H_YX.
  const Eigen::MatrixXd dh = w.asDiagonal() * j.hessian(c);
  const auto& xi = ctx.x_indices();
  const auto& yi = ctx.y_indices();
  const auto nx = static_cast<Eigen::Index>(xi.size());
  const auto ny = static_cast<Eigen::Index>(yi.size());
  Eigen::MatrixXd axx(nx, nx), axy(nx, ny), ayy(ny, ny);
  for (Eigen::Index r = 0; r < nx; ++r) {
    for (Eigen::Index q = 0; q < nx; ++q) axx(r, q) = dh(xi[r], xi[q]);
    for (Eigen::Index q = 0; q < ny; ++q) axy(r, q) = dh(xi[r], yi[q]);
  }
  for (Eigen::Index r = 0; r < ny; ++r) {
    for (Eigen::Index q = 0; q < ny; ++q) ayy(r, q) = dh(yi[r], yi[q]);
  }
  const Eigen::MatrixXd schur = axx - axy * ayy.ldlt().solve(axy.transpose());

  const double j0 = reduced_value(ctx, c);
  for (Eigen::Index r = 0; r < nx; ++r) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(j.size());
    e[xi[r]] = epsilon;
    DirectionCheck d;
    d.index = static_cast<int>(xi[r]);
    d.low_block = sp.eigenvalue(d.index) < s;
    d.second_difference = (reduced_value(ctx, c + e) + reduced_value(ctx, c - e) - 2.0 * j0) / (epsilon * epsilon);
    d.expected = schur(r, r);
    d.pass = d.low_block ? d.second_difference < 0.0 : d.second_difference > 0.0;
    rep.pass = rep.pass && d.pass;
    rep.directions.push_back(d);
  }
  return rep;
}

}  // namespace neumannlab

#pragma once

#include <cmath>
#include <concepts>
#include <utility>

#include <Eigen/Dense>

#include "neumannlab/error.hpp"

namespace neumannlab {

/// What the solvers need: a C^2 functional on R^n with a diagonal metric
/// (weights) in which gradient() is the Riesz representer and hessian() is
/// self-adjoint.
template <class F>
concept GradientFunctional = requires(const F& f, const Eigen::VectorXd& u) {
  { f.size() } -> std::convertible_to<Eigen::Index>;
  { f.weights() } -> std::convertible_to<const Eigen::VectorXd&>;
  { f.value(u) } -> std::convertible_to<double>;
  { f.gradient(u) } -> std::convertible_to<Eigen::VectorXd>;
  { f.hessian(u) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Functionals that can sample a field on a physical grid.
template <class F>
concept GridFunctional = GradientFunctional<F> && requires(const F& f, const Eigen::VectorXd& u) {
  { f.evaluate(u) } -> std::convertible_to<Eigen::VectorXd>;
  { f.range(u) } -> std::convertible_to<std::pair<double, double>>;
};

inline double metric_dot(const Eigen::VectorXd& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (w.array() * a.array() * b.array()).sum();
}

inline double metric_norm(const Eigen::VectorXd& w, const Eigen::VectorXd& a) {
  return std::sqrt(metric_dot(w, a, a));
}

/// J(u) = 1/2 sum_j w_j c_j u_j^2 in the metric w. Hessian eigenvalues are c.
class QuadraticFunctional {
 public:
  explicit QuadraticFunctional(Eigen::VectorXd curvature)
      : curvature_(std::move(curvature)), weights_(Eigen::VectorXd::Ones(curvature_.size())) {}
  QuadraticFunctional(Eigen::VectorXd curvature, Eigen::VectorXd weights)
      : curvature_(std::move(curvature)), weights_(std::move(weights)) {
    if (curvature_.size() != weights_.size()) throw Error(ErrorCode::InvalidArgument, "size mismatch");
  }

  Eigen::Index size() const { return curvature_.size(); }
  const Eigen::VectorXd& weights() const { return weights_; }
  double value(const Eigen::VectorXd& u) const {
    return 0.5 * (weights_.array() * curvature_.array() * u.array().square()).sum();
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const { return curvature_.cwiseProduct(u); }
  Eigen::MatrixXd hessian(const Eigen::VectorXd&) const { return curvature_.asDiagonal(); }

 private:
  Eigen::VectorXd curvature_;
  Eigen::VectorXd weights_;
};

}  // namespace neumannlab

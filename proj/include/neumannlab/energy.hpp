#pragma once

#include <memory>
#include <utility>

#include <Eigen/Dense>

#include "neumannlab/nonlinearity.hpp"
#include "neumannlab/spectrum.hpp"

namespace neumannlab {

/// Galerkin energy J(u) = 1/2 int |grad u|^2 - int F(u).
///
/// Gradients and Hessians are H^1 representations in coefficient space: for
/// the metric weights w_j = 1 + lambda_j,
///   <gradient(u), v>_{H^1} = sum_j w_j g_j v_j = DJ(u) v,
/// and hessian(u) is the matrix H with D H symmetric (D = diag(w)), so its
/// eigenvalues are those of the H^1-self-adjoint operator u -> u - T((f'(u)+1) u).
class EnergyFunctional {
 public:
  EnergyFunctional(std::shared_ptr<const SpectralSpace> space, Nonlinearity f)
      : space_(std::move(space)), f_(std::move(f)) {
    if (!space_) throw Error(ErrorCode::InvalidArgument, "energy needs a spectral space");
    lambda_ = space_->spectrum().eigenvalues();
  }

  EnergyFunctional with_nonlinearity(Nonlinearity f) const { return EnergyFunctional(space_, std::move(f)); }

  Eigen::Index size() const { return space_->size(); }
  const Eigen::VectorXd& weights() const { return space_->h1_weights(); }
  const SpectralSpace& space() const { return *space_; }
  const std::shared_ptr<const SpectralSpace>& space_ptr() const { return space_; }
  const Nonlinearity& nonlinearity() const { return f_; }

  double value(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd ug = space_->evaluate(u);
    const Eigen::VectorXd fu = ug.unaryExpr([this](double t) { return f_.primitive(t); });
    return 0.5 * (lambda_.array() * u.array().square()).sum() - space_->integrate(fu);
  }

  /// g_j = u_j - p_j / (1 + lambda_j),  p_j = <f(u) + u, phi_j>_{L^2}.
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const {
    return u - (compact_part_numerator(u).array() / weights().array()).matrix();
  }

  /// The L^2 projections p_j of f(u) + u (the compact part before scaling).
  Eigen::VectorXd compact_part_numerator(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd ug = space_->evaluate(u);
    const Eigen::VectorXd rhs = ug.unaryExpr([this](double t) { return f_(t) + t; });
    return space_->project_coeffs(rhs);
  }

  /// H_{jl} = delta_{jl} - q_{jl} / (1 + lambda_j),  q_{jl} = int (f'(u)+1) phi_j phi_l.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd ug = space_->evaluate(u);
    const Eigen::VectorXd weight = ug.unaryExpr([this](double t) { return f_.derivative(t) + 1.0; });
    Eigen::MatrixXd h = -(weights().cwiseInverse().asDiagonal() * space_->weighted_gram(weight));
    h.diagonal().array() += 1.0;
    return h;
  }

  double residual(const Eigen::VectorXd& u) const { return space_->h1_norm(gradient(u)); }

  /// (min u, max u) over the quadrature grid.
  std::pair<double, double> range(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd ug = space_->evaluate(u);
    return {ug.minCoeff(), ug.maxCoeff()};
  }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& u) const { return space_->evaluate(u); }

  double value(const SpectralField& u) const { return value(u.coeffs()); }
  SpectralField gradient(const SpectralField& u) const { return SpectralField(gradient(u.coeffs())); }
  Eigen::MatrixXd hessian(const SpectralField& u) const { return hessian(u.coeffs()); }

 private:
  std::shared_ptr<const SpectralSpace> space_;
  Nonlinearity f_;
  Eigen::VectorXd lambda_;
};

}  // namespace neumannlab

// Copyright (c) 2026 cbfmpc contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CBFMPC_NLP_HPP_
#define CBFMPC_NLP_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>

namespace cbfmpc {

/// Smooth nonlinear program
///
///   min f(z)   s.t.  c_E(z) = 0,  c_I(z) >= 0,  lb <= z <= ub,
///
/// presented through dense evaluators with exact first derivatives plus a
/// positive-semidefinite Hessian model of the objective. Implementations must
/// be immutable after construction: all evaluators are const and re-entrant.
class NlpProblem
{
 public:
  virtual ~NlpProblem() = default;

  virtual int num_variables() const = 0;
  virtual int num_equalities() const = 0;
  virtual int num_inequalities() const = 0;

  virtual double objective(const Eigen::VectorXd& z) const = 0;
  virtual Eigen::VectorXd objective_gradient(const Eigen::VectorXd& z) const = 0;

  /// PSD curvature model of the objective (Gauss-Newton for least-squares
  /// structured costs, exact Hessian where cheap).
  virtual Eigen::MatrixXd hessian_model(const Eigen::VectorXd& z) const = 0;

  virtual Eigen::VectorXd equality_residual(const Eigen::VectorXd& z) const = 0;
  virtual Eigen::VectorXd inequality_residual(const Eigen::VectorXd& z) const = 0;
  virtual Eigen::MatrixXd equality_jacobian(const Eigen::VectorXd& z) const = 0;
  virtual Eigen::MatrixXd inequality_jacobian(const Eigen::VectorXd& z) const = 0;

  /// Elementwise variable bounds; entries may be +-infinity.
  virtual const Eigen::VectorXd& lower_bounds() const = 0;
  virtual const Eigen::VectorXd& upper_bounds() const = 0;

 protected:
  void check_dimension(const Eigen::VectorXd& z) const
  {
    if (z.size() != num_variables())
      throw std::invalid_argument("NlpProblem: decision vector has wrong dimension");
  }
};

/// Lagrange multipliers split by constraint block. Inequality and bound
/// multipliers are nonnegative at a KKT point.
struct Multipliers
{
  Eigen::VectorXd eq;
  Eigen::VectorXd ineq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Infinity norm of the constraint violation (equalities, inequalities and
/// bounds) at z.
inline double constraint_violation(const NlpProblem& problem, const Eigen::VectorXd& z)
{
  double v = 0.0;
  if (problem.num_equalities() > 0)
    v = problem.equality_residual(z).lpNorm<Eigen::Infinity>();
  if (problem.num_inequalities() > 0) {
    const Eigen::VectorXd ci = problem.inequality_residual(z);
    v = std::max(v, (-ci.array()).max(0.0).maxCoeff());
  }
  const Eigen::VectorXd& lb = problem.lower_bounds();
  const Eigen::VectorXd& ub = problem.upper_bounds();
  for (int i = 0; i < z.size(); ++i) {
    if (std::isfinite(lb[i])) v = std::max(v, lb[i] - z[i]);
    if (std::isfinite(ub[i])) v = std::max(v, z[i] - ub[i]);
  }
  return v;
}

}  // namespace cbfmpc

#endif  // CBFMPC_NLP_HPP_

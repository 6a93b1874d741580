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

#ifndef CBFMPC_TRANSCRIPTION_HPP_
#define CBFMPC_TRANSCRIPTION_HPP_

/// Multiple-shooting transcription of the receding-horizon problem: decision
/// vector [x(0..N), u(0..N-1)], body-frame tracking cost, dynamics defects,
/// input/state boxes, and one CBF or clearance inequality per obstacle per
/// step. All derivatives are exact (chained through the RK4 stages).

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbfmpc/kinematics.hpp"
#include "cbfmpc/nlp.hpp"
#include "cbfmpc/safety.hpp"

namespace cbfmpc {

/// Diagonal stage weights Q (state error), R (input error) and terminal
/// weight P; all entries must be strictly positive.
struct Weights
{
  Eigen::Vector3d q{1.0, 1.0, 1.0};
  Eigen::Vector2d r{1.0, 1.0};
  Eigen::Vector3d p{1.0, 1.0, 1.0};

  friend bool operator==(const Weights& a, const Weights& b)
  {
    return a.q == b.q && a.r == b.r && a.p == b.p;
  }
};

/// Prediction horizon: N steps of length Ts. `substeps` sets the RK4
/// sub-interval count used both in prediction and in simulation.
struct HorizonSpec
{
  int steps{10};
  double ts{0.1};
  int substeps{1};

  friend bool operator==(const HorizonSpec&, const HorizonSpec&) = default;
};

/// Everything the transcription needs about one control instant.
struct ScenarioSnapshot
{
  RobotState state;
  double time{0.0};
  ReferenceSignal reference;
  std::vector<Obstacle> obstacles;
  Weights weights;
  HorizonSpec horizon;
  SafetyConfig safety;
  ControlInput input_min{-1.0, -1.0};
  ControlInput input_max{1.0, 1.0};
  Eigen::Vector3d state_min{-std::numeric_limits<double>::infinity(),
                            -std::numeric_limits<double>::infinity(),
                            -std::numeric_limits<double>::infinity()};
  Eigen::Vector3d state_max{std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity()};
};

namespace detail {

/// d(error_state)/d(current state) at fixed reference.
inline Eigen::Matrix3d error_state_jacobian(const RobotState& current, const ErrorState& e)
{
  const double c = std::cos(current.theta);
  const double s = std::sin(current.theta);
  Eigen::Matrix3d j;
  j << -c, -s, e.ye,
        s, -c, -e.xe,
        0.0, 0.0, -1.0;
  return j;
}

}  // namespace detail

/// The transcribed finite-dimensional problem. Immutable once built; every
/// evaluator is a pure function of z.
class MpcNlp final : public NlpProblem
{
 public:
  explicit MpcNlp(const ScenarioSnapshot& snap) : snap_(snap)
  {
    validate();
    const int n_steps = snap_.horizon.steps;
    refs_.reserve(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k)
      refs_.push_back(sample_reference(snap_.reference, snap_.time + k * snap_.horizon.ts));
    centers_.resize(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) {
      centers_[k].reserve(snap_.obstacles.size());
      for (const Obstacle& ob : snap_.obstacles)
        centers_[k].push_back(obstacle_center(ob, snap_.time + k * snap_.horizon.ts));
    }
    build_bounds();
  }

  int num_variables() const override { return 3 * (snap_.horizon.steps + 1) + 2 * snap_.horizon.steps; }
  int num_equalities() const override { return 3 * (snap_.horizon.steps + 1); }
  int num_inequalities() const override
  {
    return static_cast<int>(snap_.obstacles.size()) * snap_.horizon.steps;
  }

  int state_offset(int k) const { return 3 * k; }
  int input_offset(int k) const { return 3 * (snap_.horizon.steps + 1) + 2 * k; }

  RobotState state_at(const Eigen::VectorXd& z, int k) const
  {
    const int o = state_offset(k);
    return {z[o], z[o + 1], z[o + 2]};
  }
  ControlInput input_at(const Eigen::VectorXd& z, int k) const
  {
    const int o = input_offset(k);
    return {z[o], z[o + 1]};
  }

  const ScenarioSnapshot& snapshot() const { return snap_; }
  const ReferencePoint& reference_at(int k) const { return refs_[k]; }

  double objective(const Eigen::VectorXd& z) const override
  {
    check_dimension(z);
    const int n_steps = snap_.horizon.steps;
    double cost = 0.0;
    for (int k = 0; k < n_steps; ++k) {
      const ErrorState e = error_state(state_at(z, k), refs_[k].state);
      const ControlInput u = input_at(z, k);
      const Eigen::Vector3d ev{e.xe, e.ye, e.thetae};
      const Eigen::Vector2d ue = input_error(e, u, refs_[k].control);
      cost += ev.dot(snap_.weights.q.asDiagonal() * ev) +
              ue.dot(snap_.weights.r.asDiagonal() * ue);
    }
    const ErrorState en = error_state(state_at(z, n_steps), refs_[n_steps].state);
    const Eigen::Vector3d evn{en.xe, en.ye, en.thetae};
    cost += evn.dot(snap_.weights.p.asDiagonal() * evn);
    return cost;
  }

  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& z) const override
  {
    check_dimension(z);
    const int n_steps = snap_.horizon.steps;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(num_variables());
    for (int k = 0; k < n_steps; ++k) {
      const RobotState x = state_at(z, k);
      const ControlInput u = input_at(z, k);
      const ErrorState e = error_state(x, refs_[k].state);
      const Eigen::Vector3d ev{e.xe, e.ye, e.thetae};
      const Eigen::Vector2d ue = input_error(e, u, refs_[k].control);
      const Eigen::Matrix3d jx = detail::error_state_jacobian(x, e);
      const Eigen::Matrix<double, 2, 3> jux = input_error_state_jacobian(e, refs_[k].control);

      grad.segment<3>(state_offset(k)) +=
          2.0 * jx.transpose() * (snap_.weights.q.asDiagonal() * ev) +
          2.0 * jux.transpose() * (snap_.weights.r.asDiagonal() * ue);
      // d u_e / d u = -I
      grad.segment<2>(input_offset(k)) -= 2.0 * (snap_.weights.r.asDiagonal() * ue);
    }
    const RobotState xn = state_at(z, n_steps);
    const ErrorState en = error_state(xn, refs_[n_steps].state);
    const Eigen::Vector3d evn{en.xe, en.ye, en.thetae};
    const Eigen::Matrix3d jxn = detail::error_state_jacobian(xn, en);
    grad.segment<3>(state_offset(n_steps)) +=
        2.0 * jxn.transpose() * (snap_.weights.p.asDiagonal() * evn);
    return grad;
  }

  /// Gauss-Newton model: PSD by construction, exact at zero tracking error.
  Eigen::MatrixXd hessian_model(const Eigen::VectorXd& z) const override
  {
    check_dimension(z);
    const int n_steps = snap_.horizon.steps;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(num_variables(), num_variables());
    for (int k = 0; k < n_steps; ++k) {
      const RobotState x = state_at(z, k);
      const ErrorState e = error_state(x, refs_[k].state);
      const Eigen::Matrix3d jx = detail::error_state_jacobian(x, e);
      const Eigen::Matrix<double, 2, 3> jux = input_error_state_jacobian(e, refs_[k].control);
      const int so = state_offset(k);
      const int io = input_offset(k);

      h.block<3, 3>(so, so) += 2.0 * jx.transpose() * snap_.weights.q.asDiagonal() * jx +
                               2.0 * jux.transpose() * snap_.weights.r.asDiagonal() * jux;
      const Eigen::Matrix<double, 3, 2> cross =
          -2.0 * jux.transpose() * snap_.weights.r.asDiagonal().toDenseMatrix();
      h.block<3, 2>(so, io) += cross;
      h.block<2, 3>(io, so) += cross.transpose();
      h.block<2, 2>(io, io) += 2.0 * snap_.weights.r.asDiagonal().toDenseMatrix();
    }
    const RobotState xn = state_at(z, n_steps);
    const ErrorState en = error_state(xn, refs_[n_steps].state);
    const Eigen::Matrix3d jxn = detail::error_state_jacobian(xn, en);
    const int son = state_offset(n_steps);
    h.block<3, 3>(son, son) += 2.0 * jxn.transpose() * snap_.weights.p.asDiagonal() * jxn;
    return h;
  }

  /// Rows 0..2 pin x(0) to the measured state; rows 3+3k are the shooting
  /// defects x(k+1) - rk4(x(k), u(k)).
  Eigen::VectorXd equality_residual(const Eigen::VectorXd& z) const override
  {
    check_dimension(z);
    const int n_steps = snap_.horizon.steps;
    Eigen::VectorXd c(num_equalities());
    const RobotState x0 = state_at(z, 0);
    c[0] = x0.x - snap_.state.x;
    c[1] = x0.y - snap_.state.y;
    c[2] = x0.theta - snap_.state.theta;
    for (int k = 0; k < n_steps; ++k) {
      const RobotState pred =
          rk4_step(state_at(z, k), input_at(z, k), snap_.horizon.ts, snap_.horizon.substeps);
      const RobotState next = state_at(z, k + 1);
      c[3 + 3 * k] = next.x - pred.x;
      c[4 + 3 * k] = next.y - pred.y;
      c[5 + 3 * k] = next.theta - pred.theta;
    }
    return c;
  }

  Eigen::MatrixXd equality_jacobian(const Eigen::VectorXd& z) const override
  {
    check_dimension(z);
    const int n_steps = snap_.horizon.steps;
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(num_equalities(), num_variables());
    j.block<3, 3>(0, state_offset(0)).setIdentity();
    for (int k = 0; k < n_steps; ++k) {
      const Rk4Derivatives d = rk4_step_with_jacobians(state_at(z, k), input_at(z, k),
                                                       snap_.horizon.ts, snap_.horizon.substeps);
      const int row = 3 + 3 * k;
      j.block<3, 3>(row, state_offset(k + 1)).setIdentity();
      j.block<3, 3>(row, state_offset(k)) = -d.d_state;
      j.block<3, 2>(row, input_offset(k)) = -d.d_input;
    }
    return j;
  }

  /// Row k*M + i holds the scheme residual for obstacle i at step k, with
  /// obstacle centers advanced to the matching prediction times.
  Eigen::VectorXd inequality_residual(const Eigen::VectorXd& z) const override
  {
    check_dimension(z);
    const int n_steps = snap_.horizon.steps;
    const int m = static_cast<int>(snap_.obstacles.size());
    Eigen::VectorXd c(num_inequalities());
    for (int k = 0; k < n_steps; ++k) {
      const Eigen::Vector2d p_next = position_at(z, k + 1);
      const Eigen::Vector2d p_curr = position_at(z, k);
      for (int i = 0; i < m; ++i) {
        if (snap_.safety.scheme == ConstraintScheme::cbf) {
          const double h_next = barrier(p_next, k + 1, i);
          const double h_curr = barrier(p_curr, k, i);
          c[k * m + i] = cbf_residual(h_next, h_curr, snap_.safety.gamma);
        } else {
          c[k * m + i] = (p_next - centers_[k + 1][i]).norm() - r_sum(i);
        }
      }
    }
    return c;
  }

  Eigen::MatrixXd inequality_jacobian(const Eigen::VectorXd& z) const override
  {
    check_dimension(z);
    const int n_steps = snap_.horizon.steps;
    const int m = static_cast<int>(snap_.obstacles.size());
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(num_inequalities(), num_variables());
    for (int k = 0; k < n_steps; ++k) {
      const Eigen::Vector2d p_next = position_at(z, k + 1);
      const Eigen::Vector2d p_curr = position_at(z, k);
      for (int i = 0; i < m; ++i) {
        const int row = k * m + i;
        if (snap_.safety.scheme == ConstraintScheme::cbf) {
          j.block<1, 2>(row, state_offset(k + 1)) =
              2.0 * (p_next - centers_[k + 1][i]).transpose();
          j.block<1, 2>(row, state_offset(k)) =
              -(1.0 - snap_.safety.gamma) * 2.0 * (p_curr - centers_[k][i]).transpose();
        } else {
          const Eigen::Vector2d d = p_next - centers_[k + 1][i];
          const double dist = d.norm();
          if (dist > 1e-12)
            j.block<1, 2>(row, state_offset(k + 1)) = d.transpose() / dist;
        }
      }
    }
    return j;
  }

  const Eigen::VectorXd& lower_bounds() const override { return lb_; }
  const Eigen::VectorXd& upper_bounds() const override { return ub_; }

  double min_inequality_residual(const Eigen::VectorXd& z) const
  {
    if (num_inequalities() == 0) return std::numeric_limits<double>::infinity();
    return inequality_residual(z).minCoeff();
  }

 private:
  // u_e = (v_r cos(theta_e) - v, omega_r - omega)
  static Eigen::Vector2d input_error(const ErrorState& e, const ControlInput& u,
                                     const ControlInput& u_ref)
  {
    return {u_ref.v * std::cos(e.thetae) - u.v, u_ref.omega - u.omega};
  }

  // d u_e / d (x, y, theta); only the theta column is nonzero:
  // d(v_r cos(theta_e))/d theta = v_r sin(theta_e) since d theta_e/d theta = -1.
  static Eigen::Matrix<double, 2, 3> input_error_state_jacobian(const ErrorState& e,
                                                                const ControlInput& u_ref)
  {
    Eigen::Matrix<double, 2, 3> j = Eigen::Matrix<double, 2, 3>::Zero();
    j(0, 2) = u_ref.v * std::sin(e.thetae);
    return j;
  }

  Eigen::Vector2d position_at(const Eigen::VectorXd& z, int k) const
  {
    const int o = state_offset(k);
    return {z[o], z[o + 1]};
  }

  double r_sum(int i) const { return snap_.safety.robot_radius + snap_.obstacles[i].radius; }

  double barrier(const Eigen::Vector2d& p, int k, int i) const
  {
    const double rs = r_sum(i);
    return (p - centers_[k][i]).squaredNorm() - rs * rs;
  }

  void build_bounds()
  {
    const int n_steps = snap_.horizon.steps;
    const double inf = std::numeric_limits<double>::infinity();
    lb_ = Eigen::VectorXd::Constant(num_variables(), -inf);
    ub_ = Eigen::VectorXd::Constant(num_variables(), inf);
    for (int k = 0; k <= n_steps; ++k) {
      lb_.segment<3>(state_offset(k)) = snap_.state_min;
      ub_.segment<3>(state_offset(k)) = snap_.state_max;
    }
    for (int k = 0; k < n_steps; ++k) {
      lb_[input_offset(k)] = snap_.input_min.v;
      lb_[input_offset(k) + 1] = snap_.input_min.omega;
      ub_[input_offset(k)] = snap_.input_max.v;
      ub_[input_offset(k) + 1] = snap_.input_max.omega;
    }
  }

  void validate() const
  {
    if (snap_.horizon.steps < 1) throw std::invalid_argument("horizon.steps must be >= 1");
    if (!(snap_.horizon.ts > 0.0)) throw std::invalid_argument("horizon.ts must be positive");
    if (snap_.horizon.substeps < 1) throw std::invalid_argument("horizon.substeps must be >= 1");
    if ((snap_.weights.q.array() <= 0.0).any() || (snap_.weights.r.array() <= 0.0).any() ||
        (snap_.weights.p.array() <= 0.0).any())
      throw std::invalid_argument("weights must be strictly positive");
    if (snap_.input_min.v > snap_.input_max.v || snap_.input_min.omega > snap_.input_max.omega)
      throw std::invalid_argument("input bounds are inverted");
    if ((snap_.state_min.array() > snap_.state_max.array()).any())
      throw std::invalid_argument("state bounds are inverted");
    if (!(snap_.safety.robot_radius > 0.0))
      throw std::invalid_argument("safety.robot_radius must be positive");
    if (snap_.safety.scheme == ConstraintScheme::cbf &&
        !(snap_.safety.gamma > 0.0 && snap_.safety.gamma < 1.0))
      throw std::invalid_argument("safety.gamma must lie in (0, 1)");
    for (std::size_t i = 0; i < snap_.obstacles.size(); ++i) {
      if (!(snap_.obstacles[i].radius > 0.0))
        throw std::invalid_argument("obstacles[" + std::to_string(i) + "].radius must be positive");
      if (snap_.obstacles[i].speed < 0.0)
        throw std::invalid_argument("obstacles[" + std::to_string(i) + "].speed must be >= 0");
    }
    if (!std::isfinite(snap_.state.x) || !std::isfinite(snap_.state.y) ||
        !std::isfinite(snap_.state.theta))
      throw std::invalid_argument("current state must be finite");
  }

  ScenarioSnapshot snap_;
  std::vector<ReferencePoint> refs_;
  std::vector<std::vector<Eigen::Vector2d>> centers_;
  Eigen::VectorXd lb_;
  Eigen::VectorXd ub_;
};

inline MpcNlp build_nlp(const ScenarioSnapshot& snapshot) { return MpcNlp(snapshot); }

/// Lower bound on the terminal weight scale alpha that makes the terminal
/// cost a control Lyapunov function, given a contraction margin delta < 0
/// and input penalty scale beta. Offline tuning diagnostic only.
inline double terminal_alpha_lower_bound(const RobotState& x, const RobotState& x_r, double delta,
                                         double beta, const ControlInput& u_max)
{
  if (!(delta < 0.0))
    throw std::invalid_argument("terminal_alpha_lower_bound: delta must be negative");
  const double dx = x.x - x_r.x;
  const double dy = x.y - x_r.y;
  const double dth = wrap_angle(x.theta - x_r.theta);
  const double dist_sq = dx * dx + dy * dy + dth * dth;
  const double u_max_sq = std::max(u_max.v * u_max.v, u_max.omega * u_max.omega);
  return (dist_sq + 2.0 * beta * u_max_sq) / std::abs(delta);
}

}  // namespace cbfmpc

#endif  // CBFMPC_TRANSCRIPTION_HPP_

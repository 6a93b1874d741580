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

#ifndef CBFMPC_KINEMATICS_HPP_
#define CBFMPC_KINEMATICS_HPP_

/// Unicycle kinematics: continuous-time model, reference model, body-frame
/// error state and its dynamics, and an exact-derivative RK4 discretization.

#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace cbfmpc {

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r <= 0.0) r += two_pi;
  return r - std::numbers::pi;
}

/// Robot pose (x, y, theta) in the world frame. theta accumulates
/// unwrapped; wrapping happens only where angles are compared.
struct RobotState
{
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

/// Commanded linear and angular velocity (v, omega).
struct ControlInput
{
  double v{0.0};
  double omega{0.0};

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

/// Pose plus feedforward control of the reference robot at one instant.
struct ReferencePoint
{
  RobotState state;
  ControlInput control;
};

/// Tracking error expressed in the robot body frame; thetae is wrapped
/// to (-pi, pi].
struct ErrorState
{
  double xe{0.0};
  double ye{0.0};
  double thetae{0.0};
};

/// Time-parameterized reference: either a fixed target pose (zero
/// feedforward control) or a circle traversed at constant angular rate.
struct ReferenceSignal
{
  enum class Kind { fixed_point, circular };

  Kind kind{Kind::fixed_point};

  // fixed_point
  RobotState target{};

  // circular: position (A cos(rho t + phase), A sin(rho t + phase))
  double amplitude{0.0};
  double angular_rate{0.0};
  double phase{0.0};

  friend bool operator==(const ReferenceSignal& a, const ReferenceSignal& b)
  {
    if (a.kind != b.kind) return false;
    if (a.kind == Kind::fixed_point) return a.target == b.target;
    return a.amplitude == b.amplitude && a.angular_rate == b.angular_rate && a.phase == b.phase;
  }
};

/// Continuous-time unicycle model: returns (v cos(theta), v sin(theta), omega).
inline Eigen::Vector3d dynamics(const RobotState& state, const ControlInput& input)
{
  return {input.v * std::cos(state.theta), input.v * std::sin(state.theta), input.omega};
}

/// One classical RK4 step of `dynamics` with the input held constant (ZOH).
/// `substeps` splits dt into equal RK4 sub-intervals; 1 by default so the
/// prediction model and the simulated plant stay identical.
inline RobotState rk4_step(const RobotState& state, const ControlInput& input, double dt,
                           int substeps = 1)
{
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  if (substeps < 1) throw std::invalid_argument("rk4_step: substeps must be >= 1");

  const double h = dt / substeps;
  RobotState s = state;
  for (int i = 0; i < substeps; ++i) {
    const Eigen::Vector3d k1 = dynamics(s, input);
    const Eigen::Vector3d k2 =
        dynamics({s.x + 0.5 * h * k1.x(), s.y + 0.5 * h * k1.y(), s.theta + 0.5 * h * k1.z()},
                 input);
    const Eigen::Vector3d k3 =
        dynamics({s.x + 0.5 * h * k2.x(), s.y + 0.5 * h * k2.y(), s.theta + 0.5 * h * k2.z()},
                 input);
    const Eigen::Vector3d k4 =
        dynamics({s.x + h * k3.x(), s.y + h * k3.y(), s.theta + h * k3.z()}, input);
    const Eigen::Vector3d delta = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s = {s.x + delta.x(), s.y + delta.y(), s.theta + delta.z()};
  }
  return s;
}

/// RK4 step together with its exact Jacobians w.r.t. the state and the input,
/// chained through all four stages (and through sub-steps).
struct Rk4Derivatives
{
  RobotState next;
  Eigen::Matrix3d d_state;
  Eigen::Matrix<double, 3, 2> d_input;
};

namespace detail {

inline Eigen::Matrix3d dynamics_state_jacobian(const RobotState& s, const ControlInput& u)
{
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(0, 2) = -u.v * std::sin(s.theta);
  a(1, 2) = u.v * std::cos(s.theta);
  return a;
}

inline Eigen::Matrix<double, 3, 2> dynamics_input_jacobian(const RobotState& s)
{
  Eigen::Matrix<double, 3, 2> b = Eigen::Matrix<double, 3, 2>::Zero();
  b(0, 0) = std::cos(s.theta);
  b(1, 0) = std::sin(s.theta);
  b(2, 1) = 1.0;
  return b;
}

}  // namespace detail

inline Rk4Derivatives rk4_step_with_jacobians(const RobotState& state, const ControlInput& input,
                                              double dt, int substeps = 1)
{
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  if (substeps < 1) throw std::invalid_argument("rk4_step: substeps must be >= 1");

  using Mat32 = Eigen::Matrix<double, 3, 2>;
  const double h = dt / substeps;

  RobotState s = state;
  Eigen::Matrix3d total_dx = Eigen::Matrix3d::Identity();
  Mat32 total_du = Mat32::Zero();

  for (int i = 0; i < substeps; ++i) {
    const Eigen::Vector3d k1 = dynamics(s, input);
    const RobotState s2{s.x + 0.5 * h * k1.x(), s.y + 0.5 * h * k1.y(),
                        s.theta + 0.5 * h * k1.z()};
    const Eigen::Vector3d k2 = dynamics(s2, input);
    const RobotState s3{s.x + 0.5 * h * k2.x(), s.y + 0.5 * h * k2.y(),
                        s.theta + 0.5 * h * k2.z()};
    const Eigen::Vector3d k3 = dynamics(s3, input);
    const RobotState s4{s.x + h * k3.x(), s.y + h * k3.y(), s.theta + h * k3.z()};
    const Eigen::Vector3d k4 = dynamics(s4, input);

    const Eigen::Matrix3d a1 = detail::dynamics_state_jacobian(s, input);
    const Eigen::Matrix3d a2 = detail::dynamics_state_jacobian(s2, input);
    const Eigen::Matrix3d a3 = detail::dynamics_state_jacobian(s3, input);
    const Eigen::Matrix3d a4 = detail::dynamics_state_jacobian(s4, input);

    const Mat32 b1 = detail::dynamics_input_jacobian(s);
    const Mat32 b2 = detail::dynamics_input_jacobian(s2);
    const Mat32 b3 = detail::dynamics_input_jacobian(s3);
    const Mat32 b4 = detail::dynamics_input_jacobian(s4);

    const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d dk1_dx = a1;
    const Eigen::Matrix3d dk2_dx = a2 * (I + 0.5 * h * dk1_dx);
    const Eigen::Matrix3d dk3_dx = a3 * (I + 0.5 * h * dk2_dx);
    const Eigen::Matrix3d dk4_dx = a4 * (I + h * dk3_dx);

    const Mat32 dk1_du = b1;
    const Mat32 dk2_du = a2 * (0.5 * h * dk1_du) + b2;
    const Mat32 dk3_du = a3 * (0.5 * h * dk2_du) + b3;
    const Mat32 dk4_du = a4 * (h * dk3_du) + b4;

    const Eigen::Matrix3d step_dx =
        I + (h / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
    const Mat32 step_du = (h / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);

    const Eigen::Vector3d delta = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s = {s.x + delta.x(), s.y + delta.y(), s.theta + delta.z()};
    total_du = step_dx * total_du + step_du;
    total_dx = step_dx * total_dx;
  }

  return {s, total_dx, total_du};
}

/// Tracking error in the body frame: rotates (x_r - x, y_r - y) by the
/// robot heading; the heading error is wrapped to (-pi, pi].
inline ErrorState error_state(const RobotState& current, const RobotState& reference)
{
  const double c = std::cos(current.theta);
  const double s = std::sin(current.theta);
  const double dx = reference.x - current.x;
  const double dy = reference.y - current.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(reference.theta - current.theta)};
}

/// Time derivative of the body-frame error state.
inline Eigen::Vector3d error_dynamics(const ErrorState& error, const ControlInput& input,
                                      const ControlInput& reference_input)
{
  return {input.omega * error.ye - input.v + reference_input.v * std::cos(error.thetae),
          -input.omega * error.xe + reference_input.v * std::sin(error.thetae),
          reference_input.omega - input.omega};
}

/// Error dynamics linearized about perfect tracking. Diagnostic only: the
/// controller itself works with the nonlinear model.
inline std::pair<Eigen::Matrix3d, Eigen::Matrix<double, 3, 2>> linearize_error_dynamics(
    const ControlInput& reference_input)
{
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(0, 1) = reference_input.omega;
  a(1, 0) = -reference_input.omega;
  a(1, 2) = reference_input.v;
  Eigen::Matrix<double, 3, 2> b = Eigen::Matrix<double, 3, 2>::Zero();
  b(0, 0) = 1.0;
  b(2, 1) = 1.0;
  return {a, b};
}

/// Numerical rank of the controllability matrix [B, AB, A^2 B].
inline int controllability_rank(const Eigen::Matrix3d& a, const Eigen::Matrix<double, 3, 2>& b)
{
  Eigen::Matrix<double, 3, 6> ctrb;
  ctrb.block<3, 2>(0, 0) = b;
  ctrb.block<3, 2>(0, 2) = a * b;
  ctrb.block<3, 2>(0, 4) = a * a * b;
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 6>> svd(ctrb);
  svd.setThreshold(1e-9);
  return static_cast<int>(svd.rank());
}

/// Sample the reference robot at time t. Circular references move along the
/// circle with tangent heading (continuous, unwrapped) and feedforward
/// v_r = A|rho|, omega_r = rho; fixed-point references carry zero control.
inline ReferencePoint sample_reference(const ReferenceSignal& signal, double t)
{
  if (signal.kind == ReferenceSignal::Kind::fixed_point) {
    return {signal.target, {0.0, 0.0}};
  }
  const double rho = signal.angular_rate;
  const double a = signal.amplitude;
  const double ang = rho * t + signal.phase;
  const double half_pi = 0.5 * std::numbers::pi;
  const double heading = rho < 0.0 ? ang - half_pi : ang + half_pi;
  return {{a * std::cos(ang), a * std::sin(ang), heading}, {a * std::abs(rho), rho}};
}

}  // namespace cbfmpc

#endif  // CBFMPC_KINEMATICS_HPP_

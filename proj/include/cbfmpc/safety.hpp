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

#ifndef CBFMPC_SAFETY_HPP_
#define CBFMPC_SAFETY_HPP_

/// Circular obstacles, the barrier function h and Euclidean clearance l,
/// and the per-step residuals of the two avoidance constraint schemes.

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace cbfmpc {

/// Circular obstacle under a constant-velocity motion model:
/// center(t) = center0 + speed * t * (cos(heading), sin(heading)).
struct Obstacle
{
  Eigen::Vector2d center0{0.0, 0.0};
  double radius{0.0};
  double speed{0.0};
  double heading{0.0};

  friend bool operator==(const Obstacle& a, const Obstacle& b)
  {
    return a.center0 == b.center0 && a.radius == b.radius && a.speed == b.speed &&
           a.heading == b.heading;
  }
};

/// Which avoidance constraint the controller enforces over the horizon.
enum class ConstraintScheme { cbf, bt };

struct SafetyConfig
{
  double robot_radius{0.15};
  double gamma{0.3};
  ConstraintScheme scheme{ConstraintScheme::cbf};

  friend bool operator==(const SafetyConfig&, const SafetyConfig&) = default;
};

/// Obstacle center at time t under the constant-velocity model.
inline Eigen::Vector2d obstacle_center(const Obstacle& obstacle, double t)
{
  return obstacle.center0 +
         obstacle.speed * t * Eigen::Vector2d{std::cos(obstacle.heading), std::sin(obstacle.heading)};
}

/// Barrier value: squared center distance minus the squared sum of radii.
/// Nonnegative exactly on the safe set.
inline double barrier_h(const Eigen::Vector2d& robot_xy, const Obstacle& obstacle, double t,
                        double robot_radius)
{
  const Eigen::Vector2d d = robot_xy - obstacle_center(obstacle, t);
  const double r_sum = robot_radius + obstacle.radius;
  return d.squaredNorm() - r_sum * r_sum;
}

/// Euclidean clearance: center distance minus the sum of radii.
inline double clearance_l(const Eigen::Vector2d& robot_xy, const Obstacle& obstacle, double t,
                          double robot_radius)
{
  const Eigen::Vector2d d = robot_xy - obstacle_center(obstacle, t);
  return d.norm() - (robot_radius + obstacle.radius);
}

/// Discrete-time CBF residual h_next - (1 - gamma) h_curr; the constraint
/// h_next - h_curr >= -gamma h_curr is satisfied iff the residual is >= 0.
inline double cbf_residual(double h_next, double h_curr, double gamma)
{
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("cbf_residual: gamma must lie in (0, 1)");
  return h_next - (1.0 - gamma) * h_curr;
}

/// Plain clearance constraint at the next predicted state; satisfied iff >= 0.
inline double bt_residual(const Eigen::Vector2d& robot_xy_next, const Obstacle& obstacle,
                          double t_next, double robot_radius)
{
  return clearance_l(robot_xy_next, obstacle, t_next, robot_radius);
}

}  // namespace cbfmpc

#endif  // CBFMPC_SAFETY_HPP_

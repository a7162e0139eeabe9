// Copyright 2026 The apfsim Authors
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


#pragma once

#include <apf/common.hpp>
#include <apf/modes.hpp>

#include <limits>
#include <optional>

// Artificial-potential-field controller: saturated position feedback, a
// two-way obstacle classification, one radial and two rotational repulsive
// forces, and distance-weighted blending of the two velocity proposals.
namespace apf::control {

/// Distance floor applied inside the inverse-square force laws.
inline constexpr double kRhoMin = 0.01;
/// Below this TCP speed the approach angle is undefined.
inline constexpr double kMinSpeed = 1e-6;
/// Robot and obstacle closer than this are treated as coincident.
inline constexpr double kCoincident = 1e-9;

struct ControlGains {
  double k_pc1 = 0.2;   // m/s, saturation of the position feedback
  double k_pc2 = 10.0;  // 1/m
  double k_ca1 = 6e-3;  // radial repulsion
  double k_ca2 = 1.0;   // rotation about the obstacle, driven by v_R
  double k_ca3 = 1.0;   // rotation about the obstacle, driven by the goal direction
  double k_rep = 1.0;
  double tau = 20.0;                  // 1/m, attenuation of the avoidance weight
  double theta_obs = deg2rad(45.0);   // rad
  double v_max = 0.2;                 // m/s

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(name, "must be > 0");
    };
    positive(k_pc1, "gains.k_pc1");
    positive(k_pc2, "gains.k_pc2");
    positive(k_ca1, "gains.k_ca1");
    positive(k_ca2, "gains.k_ca2");
    positive(k_ca3, "gains.k_ca3");
    positive(k_rep, "gains.k_rep");
    positive(tau, "gains.tau_per_m");
    positive(v_max, "gains.v_max_m_s");
    if (!(theta_obs > 0.0 && theta_obs < kPi / 2.0))
      throw ValidationError("gains.theta_obs_deg", "must lie in the open range (0, 90)");
  }

  bool operator==(const ControlGains&) const = default;
};

struct ControlInputs {
  Vec3 x_r = Vec3::Zero();     // TCP position
  Vec3 v_r = Vec3::Zero();     // current TCP velocity
  Vec3 x_g = Vec3::Zero();     // goal
  Vec3 xdot_g = Vec3::Zero();  // goal feed-forward velocity
  Vec3 x_o = Vec3::Zero();     // obstacle (hand)
};

struct ObstacleClass {
  ObstacleKind kind = ObstacleKind::Type2NonImminent;
  /// Angle between v_R and the robot-to-obstacle vector. NaN when the TCP is
  /// (numerically) at rest.
  double angle = std::numeric_limits<double>::quiet_NaN();
};

struct RepulsiveBreakdown {
  Vec3 f_rep1 = Vec3::Zero();
  Vec3 f_rep2 = Vec3::Zero();
  Vec3 f_rep3 = Vec3::Zero();
  int c1 = 1;
  int c2 = 1;
  Vec3 v_rep = Vec3::Zero();
};

struct RotationalDirection {
  Vec3 n_b = Vec3::UnitZ();
  int c = 1;
};

struct TickCommand {
  Vec3 v_cmd = Vec3::Zero();
  std::optional<RepulsiveBreakdown> breakdown;
};

inline Vec3 clamp_speed(const Vec3& v, double v_max) {
  const double n = v.norm();
  return n > v_max ? Vec3(v * (v_max / n)) : v;
}

/// Saturated position feedback. The feedback term opposes the error
/// e = x_r - x_g so the TCP converges onto the goal; tanh acts per axis.
inline Vec3 position_velocity(const Vec3& x_r, const Vec3& x_g, const Vec3& xdot_g,
                              const ControlGains& gains) {
  const Vec3 e = x_r - x_g;
  return xdot_g - gains.k_pc1 * (gains.k_pc2 * e).array().tanh().matrix();
}

inline ObstacleClass classify_obstacle(const Vec3& v_r, const Vec3& x_r, const Vec3& x_o,
                                       double theta_obs) {
  const Vec3 d = x_o - x_r;
  if (d.norm() < kCoincident) throw DegenerateGeometry("TCP and obstacle coincide");
  ObstacleClass out;
  if (v_r.norm() < kMinSpeed) return out;
  // atan2 keeps full precision near 0 and exactly reproduces pi/4 for
  // equal cross/dot magnitudes, so the boundary test is strict in practice.
  out.angle = std::atan2(v_r.cross(d).norm(), v_r.dot(d));
  out.kind = out.angle < theta_obs ? ObstacleKind::Type1Imminent : ObstacleKind::Type2NonImminent;
  return out;
}

inline Vec3 repulsive_force_1(const Vec3& x_r, const Vec3& x_o, double k_ca1) {
  const Vec3 d = x_o - x_r;
  const double rho = d.norm();
  if (rho < kCoincident) throw DegenerateGeometry("TCP and obstacle coincide");
  const double rf = std::max(rho, kRhoMin);
  return -(k_ca1 / (rf * rf)) * (d / rho);
}

/// Unit direction perpendicular to n_ro built from u by a double cross
/// product, with its sign constant chosen so that c * n_b leans toward the
/// robot base (the origin).
inline RotationalDirection rotational_direction(const Vec3& u, const Vec3& n_ro, const Vec3& x_r) {
  RotationalDirection out;
  const Vec3 a = u.cross(n_ro);
  if (a.norm() >= 1e-9) {
    out.n_b = a.cross(n_ro).normalized();
  } else {
    // u is parallel to n_ro (or zero): project world vertical, or world x
    // when n_ro itself is vertical.
    Vec3 p = Vec3::UnitZ() - n_ro.z() * n_ro;
    if (p.norm() < 1e-6) p = Vec3::UnitX() - n_ro.x() * n_ro;
    out.n_b = p.normalized();
  }
  out.c = out.n_b.dot(-x_r) < 0.0 ? -1 : 1;
  return out;
}

inline RepulsiveBreakdown repulsive_velocity(const ControlInputs& in, ObstacleKind kind,
                                             const ControlGains& gains) {
  const Vec3 d = in.x_o - in.x_r;
  const double rho = d.norm();
  if (rho < kCoincident) throw DegenerateGeometry("TCP and obstacle coincide");
  const Vec3 n_ro = d / rho;
  const double rf = std::max(rho, kRhoMin);
  const double inv_sq = 1.0 / (rf * rf);

  RepulsiveBreakdown out;
  out.f_rep1 = -gains.k_ca1 * inv_sq * n_ro;
  if (kind == ObstacleKind::Type1Imminent) {
    const auto r1 = rotational_direction(in.v_r, n_ro, in.x_r);
    out.c1 = r1.c;
    out.f_rep2 = gains.k_ca2 * r1.c * inv_sq * r1.n_b;

    const Vec3 to_goal = in.x_g - in.x_r;
    const Vec3 n_rg = to_goal.norm() < kCoincident ? Vec3::Zero() : Vec3(to_goal.normalized());
    const auto r2 = rotational_direction(n_rg, n_ro, in.x_r);
    out.c2 = r2.c;
    out.f_rep3 = gains.k_ca3 * r2.c * inv_sq * r2.n_b;
  }
  out.v_rep = in.v_r + gains.k_rep * (out.f_rep1 + out.f_rep2 + out.f_rep3);
  return out;
}

/// Avoidance weight exp(-tau * rho): 1 at contact, vanishing far away.
inline double blend_weight(double rho, double tau) { return std::exp(-tau * rho); }

inline Vec3 blend(const Vec3& v_pc, const Vec3& v_rep, double rho, double tau) {
  const double w = blend_weight(rho, tau);
  return v_pc * (1.0 - w) + v_rep * w;
}

/// One controller evaluation for the non-free-drive modes. The result is
/// capped at gains.v_max.
inline TickCommand control_tick(const ControlInputs& in, const ControlGains& gains, Mode mode) {
  TickCommand out;
  const Vec3 v_pc = position_velocity(in.x_r, in.x_g, in.xdot_g, gains);
  switch (mode) {
    case Mode::Position:
      out.v_cmd = v_pc;
      break;
    case Mode::AvoidType1:
    case Mode::AvoidType2: {
      const auto kind =
          mode == Mode::AvoidType1 ? ObstacleKind::Type1Imminent : ObstacleKind::Type2NonImminent;
      auto br = repulsive_velocity(in, kind, gains);
      out.v_cmd = blend(v_pc, br.v_rep, (in.x_o - in.x_r).norm(), gains.tau);
      out.breakdown = br;
      break;
    }
    case Mode::FreeDrive:
      throw std::invalid_argument("control_tick does not handle free-drive mode");
  }
  out.v_cmd = clamp_speed(out.v_cmd, gains.v_max);
  return out;
}

}  // namespace apf::control

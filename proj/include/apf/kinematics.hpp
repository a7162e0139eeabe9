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

#include <array>
#include <utility>

// Forward kinematics, geometric Jacobian and damped least-squares rate
// resolution for a 6-joint serial arm described URDF-style: every joint
// carries a fixed parent-to-joint transform followed by a rotation about
// its own axis.
namespace apf::kin {

inline constexpr int kNumJoints = 6;

/// Fixed rigid transform given as a translation plus roll-pitch-yaw
/// (extrinsic x-y-z, i.e. R = Rz(yaw) * Ry(pitch) * Rx(roll)).
struct FixedTransform {
  Vec3 translation = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();

  Eigen::Isometry3d isometry() const {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.translation() = translation;
    t.linear() = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                  Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                     .toRotationMatrix();
    return t;
  }

  bool operator==(const FixedTransform&) const = default;
};

struct JointDescriptor {
  Vec3 axis = Vec3::UnitZ();
  FixedTransform origin;

  bool operator==(const JointDescriptor&) const = default;
};

struct JointLimit {
  double min = -2.0 * kPi;
  double max = 2.0 * kPi;

  bool contains(double q) const { return q >= min && q <= max; }
  bool operator==(const JointLimit&) const = default;
};

struct RobotModel {
  std::array<JointDescriptor, kNumJoints> joints;
  std::array<JointLimit, kNumJoints> joint_limits;
  Vec6 rate_limits = Vec6::Constant(kPi);
  FixedTransform tcp_offset;

  /// Throws ValidationError naming the offending field.
  void validate() const {
    for (int i = 0; i < kNumJoints; ++i) {
      const std::string idx = "[" + std::to_string(i) + "]";
      const auto& j = joints[i];
      if (!all_finite(j.axis) || j.axis.norm() < 1e-12)
        throw ValidationError("joints" + idx + ".axis", "must be a finite non-zero vector");
      if (std::abs(j.axis.norm() - 1.0) > 1e-9)
        throw ValidationError("joints" + idx + ".axis", "must be unit length");
      if (!all_finite(j.origin.translation) || !all_finite(j.origin.rpy))
        throw ValidationError("joints" + idx, "transform must be finite");
      const auto& lim = joint_limits[i];
      if (!(lim.min < lim.max))
        throw ValidationError("joint_limits_rad" + idx, "min < max required");
      if (!(rate_limits[i] > 0.0) || !std::isfinite(rate_limits[i]))
        throw ValidationError("rate_limits_rad_s" + idx, "must be > 0");
    }
    if (!all_finite(tcp_offset.translation) || !all_finite(tcp_offset.rpy))
      throw ValidationError("tcp_offset", "transform must be finite");
  }

  bool within_limits(const Vec6& q) const {
    for (int i = 0; i < kNumJoints; ++i)
      if (!joint_limits[i].contains(q[i])) return false;
    return true;
  }

  bool operator==(const RobotModel&) const = default;
};

struct JointState {
  Vec6 q = Vec6::Zero();
  Vec6 q_dot = Vec6::Zero();
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/// Rows 0-2 map joint rates to TCP linear velocity, rows 3-5 to angular velocity.
struct Jacobian {
  Mat6 matrix = Mat6::Zero();

  auto linear() const { return matrix.topRows<3>(); }
  auto angular() const { return matrix.bottomRows<3>(); }
};

namespace detail {

// World frames of every joint (after its fixed origin, before its rotation)
// plus the TCP frame.
struct ChainFrames {
  std::array<Eigen::Isometry3d, kNumJoints> joint;
  Eigen::Isometry3d tcp;
};

inline ChainFrames chain_frames(const RobotModel& model, const Vec6& q) {
  ChainFrames out;
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (int i = 0; i < kNumJoints; ++i) {
    t = t * model.joints[i].origin.isometry();
    out.joint[i] = t;
    t = t * Eigen::AngleAxisd(q[i], model.joints[i].axis);
  }
  out.tcp = t * model.tcp_offset.isometry();
  return out;
}

}  // namespace detail

inline Pose forward_kinematics(const RobotModel& model, const Vec6& q) {
  const auto frames = detail::chain_frames(model, q);
  Pose pose;
  pose.position = frames.tcp.translation();
  pose.orientation = Eigen::Quaterniond(frames.tcp.rotation()).normalized();
  return pose;
}

inline Jacobian jacobian(const RobotModel& model, const Vec6& q) {
  const auto frames = detail::chain_frames(model, q);
  const Vec3 p_tcp = frames.tcp.translation();
  Jacobian jac;
  for (int i = 0; i < kNumJoints; ++i) {
    const Vec3 z = frames.joint[i].linear() * model.joints[i].axis;
    const Vec3 p = frames.joint[i].translation();
    jac.matrix.block<3, 1>(0, i) = z.cross(p_tcp - p);
    jac.matrix.block<3, 1>(3, i) = z;
  }
  return jac;
}

/// Damped least squares: q_dot = J^T (J J^T + damping^2 I)^-1 v.
inline Vec6 solve_joint_rates(const Jacobian& jac, const Vec6& v, double damping) {
  if (!(damping >= 0.0)) throw std::invalid_argument("damping must be >= 0");
  if (!all_finite(jac.matrix) || !all_finite(v) || !std::isfinite(damping))
    throw NumericalFailure("non-finite input to joint-rate solve");
  if (v.isZero(0.0)) return Vec6::Zero();

  const Mat6& j = jac.matrix;
  const Mat6 jjt = j * j.transpose() + damping * damping * Mat6::Identity();
  const Eigen::PartialPivLU<Mat6> lu(jjt);
  const Vec6 q_dot = j.transpose() * lu.solve(v);
  if (!all_finite(q_dot)) throw NumericalFailure("joint-rate solve produced non-finite rates");
  return q_dot;
}

/// Yoshikawa measure on the linear block: sqrt(det(J_lin J_lin^T)).
inline double manipulability(const Jacobian& jac) {
  const Eigen::Matrix3d m = jac.linear() * jac.linear().transpose();
  return std::sqrt(std::max(0.0, m.determinant()));
}

}  // namespace apf::kin

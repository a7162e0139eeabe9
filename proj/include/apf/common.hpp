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

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace apf {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Error hierarchy. Everything derives from apf::Error so the CLI can map
// families of failures onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = -1, int column = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line + 1) + ", column " +
                              std::to_string(column + 1) + ")"
                        : what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& constraint)
      : Error(field + ": " + constraint), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class JointLimitViolation : public Error {
 public:
  JointLimitViolation(int joint, double value)
      : Error("joint " + std::to_string(joint + 1) + " left its limits (q = " +
              std::to_string(value) + " rad)"),
        joint_(joint) {}
  int joint() const { return joint_; }

 private:
  int joint_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class PortInUse : public Error {
 public:
  explicit PortInUse(unsigned short port)
      : Error("port " + std::to_string(port) + " is already in use"), port_(port) {}
  unsigned short port() const { return port_; }

 private:
  unsigned short port_;
};

class EmptyLog : public Error {
 public:
  EmptyLog() : Error("trajectory log is empty") {}
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.array().isFinite().all();
}

}  // namespace apf

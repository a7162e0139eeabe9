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


#include <apf/supervisor.hpp>

#include <gtest/gtest.h>

#include <random>
#include <tuple>

namespace {

using apf::Mode;
using apf::ObstacleKind;
using apf::Vec3;
using apf::supervisor::Thresholds;
using apf::supervisor::step_mode;

constexpr auto T1 = ObstacleKind::Type1Imminent;
constexpr auto T2 = ObstacleKind::Type2NonImminent;

// Shared-workspace thresholds: d_at = 0.2, d_act = 0.1, d_dct = 0.2.
const Thresholds kShared{0.2, 0.1, 0.2};

// Representative distances for the three zones.
constexpr double kNear = 0.05;  // below d_act
constexpr double kBand = 0.15;  // between d_act and d_at
constexpr double kFar = 0.25;   // beyond d_at and d_dct

struct Case {
  Mode prev;
  double d_ro;
  ObstacleKind kind;
  Mode expected;
};

// Written out by hand from the zone rules; one row per (mode, zone, class).
const Case kTable[] = {
    {Mode::Position, kNear, T1, Mode::FreeDrive},     {Mode::Position, kNear, T2, Mode::FreeDrive},
    {Mode::Position, kBand, T1, Mode::AvoidType1},    {Mode::Position, kBand, T2, Mode::AvoidType2},
    {Mode::Position, kFar, T1, Mode::Position},       {Mode::Position, kFar, T2, Mode::Position},
    {Mode::AvoidType1, kNear, T1, Mode::FreeDrive},   {Mode::AvoidType1, kNear, T2, Mode::FreeDrive},
    {Mode::AvoidType1, kBand, T1, Mode::AvoidType1},  {Mode::AvoidType1, kBand, T2, Mode::AvoidType2},
    {Mode::AvoidType1, kFar, T1, Mode::Position},     {Mode::AvoidType1, kFar, T2, Mode::Position},
    {Mode::AvoidType2, kNear, T1, Mode::FreeDrive},   {Mode::AvoidType2, kNear, T2, Mode::FreeDrive},
    {Mode::AvoidType2, kBand, T1, Mode::AvoidType1},  {Mode::AvoidType2, kBand, T2, Mode::AvoidType2},
    {Mode::AvoidType2, kFar, T1, Mode::Position},     {Mode::AvoidType2, kFar, T2, Mode::Position},
    {Mode::FreeDrive, kNear, T1, Mode::FreeDrive},    {Mode::FreeDrive, kNear, T2, Mode::FreeDrive},
    {Mode::FreeDrive, kBand, T1, Mode::FreeDrive},    {Mode::FreeDrive, kBand, T2, Mode::FreeDrive},
    {Mode::FreeDrive, kFar, T1, Mode::Position},      {Mode::FreeDrive, kFar, T2, Mode::Position},
};

TEST(StepMode, AllTwentyFourTransitions) {
  int checked = 0;
  for (const auto& c : kTable) {
    EXPECT_EQ(step_mode(c.prev, c.d_ro, c.kind, kShared), c.expected)
        << apf::to_string(c.prev) << " d_ro=" << c.d_ro << " " << apf::to_string(c.kind);
    ++checked;
  }
  EXPECT_EQ(checked, 24);
}

TEST(StepMode, DocumentedExamples) {
  EXPECT_EQ(step_mode(Mode::Position, 0.15, T1, kShared), Mode::AvoidType1);
  EXPECT_EQ(step_mode(Mode::FreeDrive, 0.15, T1, kShared), Mode::FreeDrive);
  EXPECT_EQ(step_mode(Mode::FreeDrive, 0.25, T1, kShared), Mode::Position);
}

TEST(StepMode, BoundaryConventions) {
  EXPECT_EQ(step_mode(Mode::Position, 0.2, T1, kShared), Mode::Position);     // d_ro = d_at
  EXPECT_EQ(step_mode(Mode::Position, 0.1, T2, kShared), Mode::AvoidType2);   // d_ro = d_act
  EXPECT_EQ(step_mode(Mode::FreeDrive, 0.2, T2, kShared), Mode::FreeDrive);   // d_ro = d_dct holds
  EXPECT_EQ(step_mode(Mode::FreeDrive, std::nextafter(0.2, 1.0), T2, kShared), Mode::Position);
}

TEST(StepMode, HysteresisHoldsForAnyClass) {
  const Thresholds th{0.3, 0.1, 0.2};  // d_dct inside the avoidance band
  for (double d = 0.0; d <= 0.2; d += 0.001)
    for (auto k : {T1, T2}) EXPECT_EQ(step_mode(Mode::FreeDrive, d, k, th), Mode::FreeDrive);
  EXPECT_EQ(step_mode(Mode::FreeDrive, 0.25, T1, th), Mode::AvoidType1);
  EXPECT_EQ(step_mode(Mode::Position, 0.15, T1, th), Mode::AvoidType1);
}

TEST(StepMode, ZoneMappingWithoutFreeDriveHistory) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(0.0, 0.5);
  for (int i = 0; i < 5000; ++i) {
    const double d = dist(rng);
    for (Mode prev : {Mode::Position, Mode::AvoidType1, Mode::AvoidType2})
      for (auto k : {T1, T2}) {
        const Mode m = step_mode(prev, d, k, kShared);
        if (d >= kShared.d_at)
          EXPECT_EQ(m, Mode::Position);
        else if (d >= kShared.d_act)
          EXPECT_TRUE(apf::is_avoidance(m));
        else
          EXPECT_EQ(m, Mode::FreeDrive);
      }
  }
}

TEST(StepMode, PositionStaysPutBeyondThreshold) {
  Mode m = Mode::Position;
  for (int i = 0; i < 100; ++i) {
    m = step_mode(m, 0.5, i % 2 ? T1 : T2, kShared);
    EXPECT_EQ(m, Mode::Position);
  }
}

TEST(Thresholds, Validation) {
  EXPECT_NO_THROW(kShared.validate());
  EXPECT_THROW((Thresholds{0.2, 0.1, 0.1}.validate()), apf::ValidationError);   // d_dct = d_act
  EXPECT_THROW((Thresholds{0.2, 0.1, 0.05}.validate()), apf::ValidationError);  // d_dct < d_act
  EXPECT_THROW((Thresholds{0.1, 0.1, 0.2}.validate()), apf::ValidationError);   // d_at = d_act
  try {
    Thresholds{0.2, 0.1, 0.05}.validate();
  } catch (const apf::ValidationError& e) {
    EXPECT_EQ(e.field(), "thresholds.d_dct_m");
  }
}

TEST(FreeDrive, HoldsWithoutDrag) {
  EXPECT_EQ(apf::supervisor::free_drive_update(Vec3(1, 2, 3), std::nullopt, 1.0, 0.2), Vec3::Zero());
}

TEST(FreeDrive, FollowsDragWithCompliance) {
  EXPECT_EQ(apf::supervisor::free_drive_update(Vec3::Zero(), Vec3(0.1, 0, 0), 1.0, 0.2), Vec3(0.1, 0, 0));
  EXPECT_NEAR((apf::supervisor::free_drive_update(Vec3::Zero(), Vec3(0.1, 0, 0), 0.5, 0.2) -
               Vec3(0.05, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(FreeDrive, ClampsToSpeedCap) {
  const Vec3 v = apf::supervisor::free_drive_update(Vec3::Zero(), Vec3(1, 0, 0), 1.0, 0.2);
  EXPECT_NEAR((v - Vec3(0.2, 0, 0)).norm(), 0.0, 1e-15);
}

}  // namespace

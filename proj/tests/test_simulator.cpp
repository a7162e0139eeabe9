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


#include <apf/io.hpp>
#include <apf/simulator.hpp>

#include <gtest/gtest.h>

#include <cmath>

namespace {

using apf::Mode;
using apf::Vec3;
using apf::Vec6;
using namespace apf::sim;

const std::string kData = APF_DATA_DIR;

Scenario calibration() { return apf::io::parse_scenario(kData + "/scenarios/calibration.yaml"); }

ObstacleTrack static_hand(const Vec3& p) {
  ObstacleTrack t;
  t.source = StaticTrack{p};
  return t;
}

const Vec3 kA(-0.3, 0.8, 0.7);
const Vec3 kB(0.3, 0.8, 0.7);

TEST(SimStep, NoCommandLeavesStateUnchanged) {
  auto s = calibration();
  const auto track = static_hand(Vec3(10, 10, 10));
  const auto st0 = initial_state(s.config, track);
  TaskPlan plan;
  plan.waypoints = {st0.tcp.position};
  const auto out = sim_step(st0, s.config, track, plan);
  EXPECT_EQ(out.state.joints.q, st0.joints.q);
  EXPECT_EQ(out.state.tcp.position, st0.tcp.position);
  EXPECT_EQ(out.record.v_cmd, Vec3::Zero());
  EXPECT_NEAR(out.state.t, st0.t + s.config.dt, 1e-12);
}

TEST(SimStep, InitialPoseIsPointA) {
  auto s = calibration();
  const auto st = initial_state(s.config, s.track);
  EXPECT_LT((st.tcp.position - kA).norm(), 1e-6);
}

TEST(SimStep, DistanceMatchesPositions) {
  auto s = calibration();
  auto st = initial_state(s.config, s.track);
  for (int k = 0; k < 30; ++k) {
    st = sim_step(st, s.config, s.track, s.plan).state;
    EXPECT_NEAR(st.d_ro, (st.tcp.position - st.hand).norm(), 1e-12);
  }
}

TEST(Run, ReachesGoalWithoutObstacle) {
  auto s = calibration();
  const auto log = run(s.config, static_hand(Vec3(10, 10, 10)), s.plan);
  ASSERT_FALSE(log.halt);
  EXPECT_TRUE(log.final_state.complete);
  EXPECT_LT((log.final_state.tcp.position - kB).norm(), s.plan.arrival_tolerance);
  for (const auto& r : log.records) {
    EXPECT_LE(r.v_cmd.norm(), s.config.gains.v_max * (1 + 1e-12));
    EXPECT_EQ(r.mode, Mode::Position);
  }
}

TEST(Run, DistanceToGoalNonIncreasingAfterTransient) {
  auto s = calibration();
  const auto log = run(s.config, static_hand(Vec3(10, 10, 10)), s.plan);
  double prev = INFINITY;
  for (std::size_t k = 2; k < log.records.size(); ++k) {
    const double d = (log.records[k].tcp - kB).norm();
    EXPECT_LE(d, prev + 1e-9) << "tick " << k;
    prev = d;
  }
}

TEST(Run, StaticMidpointHandIsAvoided) {
  auto s = calibration();
  const auto log = run(s.config, s.track, s.plan);
  ASSERT_FALSE(log.halt);
  EXPECT_TRUE(log.final_state.complete);
  double min_d = INFINITY;
  bool avoided = false;
  for (const auto& r : log.records) {
    min_d = std::min(min_d, r.d_ro);
    avoided = avoided || apf::is_avoidance(r.mode);
  }
  EXPECT_GT(min_d, s.config.thresholds.d_act);
  EXPECT_TRUE(avoided);
}

TEST(Run, MatchesFineStepOracle) {
  // Oracle: the same closed loop integrated at dt = 1 ms.
  auto s = calibration();
  auto fine = s;
  fine.config.dt = 0.001;
  const auto coarse_log = run(s.config, s.track, s.plan);
  const auto fine_log = run(fine.config, fine.track, fine.plan);
  ASSERT_TRUE(fine_log.final_state.complete);
  double fine_min = INFINITY;
  for (const auto& r : fine_log.records) fine_min = std::min(fine_min, r.d_ro);
  EXPECT_GT(fine_min, s.config.thresholds.d_act);
  EXPECT_LT((coarse_log.final_state.tcp.position - fine_log.final_state.tcp.position).norm(), 0.01);
}

TEST(Run, HalvingDtMovesFinalPoseLessThanFiveMillimetres) {
  auto s = calibration();
  auto half = s;
  half.config.dt = s.config.dt / 2;
  const auto a = run(s.config, s.track, s.plan);
  const auto b = run(half.config, half.track, half.plan);
  EXPECT_LT((a.final_state.tcp.position - b.final_state.tcp.position).norm(), 0.005);
}

TEST(Run, StopsAtDurationMax) {
  auto s = calibration();
  s.config.duration_max = 1.0;
  const auto log = run(s.config, s.track, s.plan);
  EXPECT_EQ(log.records.size(), 10u);
  EXPECT_FALSE(log.final_state.complete);
}

TEST(Run, CyclingPlanRunsToDurationMax) {
  auto s = apf::io::parse_scenario(kData + "/scenarios/triangle.yaml");
  s.config.duration_max = 30.0;
  const auto log = run(s.config, s.track, s.plan);
  ASSERT_FALSE(log.halt);
  EXPECT_EQ(static_cast<std::int64_t>(log.records.size()), s.config.max_ticks());
  bool wrapped = false;
  for (std::size_t k = 1; k < log.records.size(); ++k)
    wrapped = wrapped || log.records[k].waypoint < log.records[k - 1].waypoint;
  EXPECT_TRUE(wrapped);
}

TEST(Run, TimestampsAreArithmetic) {
  auto s = calibration();
  const auto log = run(s.config, s.track, s.plan);
  for (std::size_t k = 0; k < log.records.size(); ++k)
    EXPECT_EQ(log.records[k].t, static_cast<double>(k) * s.config.dt);
}

TEST(Run, Deterministic) {
  auto s = calibration();
  const auto a = run(s.config, s.track, s.plan);
  const auto b = run(s.config, s.track, s.plan);
  EXPECT_EQ(a.records, b.records);
}

TEST(Run, JointRatesRespectLimits) {
  auto s = calibration();
  s.config.robot.rate_limits = Vec6::Constant(0.05);
  s.config.duration_max = 5.0;
  const auto log = run(s.config, s.track, s.plan);
  for (std::size_t k = 1; k < log.records.size(); ++k) {
    const Vec6 rate = (log.records[k].q - log.records[k - 1].q) / s.config.dt;
    EXPECT_LE(rate.cwiseAbs().maxCoeff(), 0.05 * (1 + 1e-9));
  }
}

TEST(Run, JointLimitHaltsWithPartialLog) {
  auto s = calibration();
  s.config.robot.joint_limits[0] = {1.70, 1.75};
  const auto log = run(s.config, s.track, s.plan);
  ASSERT_TRUE(log.halt);
  EXPECT_NE(log.halt->find("JointLimitViolation"), std::string::npos);
  EXPECT_FALSE(log.records.empty());
  for (const auto& r : log.records) EXPECT_TRUE(s.config.robot.within_limits(r.q));
}

TEST(Run, CloseHandTriggersFreeDriveHold) {
  auto s = calibration();
  s.config.thresholds = {0.2, 0.1, 0.2};
  const auto tcp0 = initial_state(s.config, s.track).tcp.position;
  const auto track = static_hand(tcp0 + Vec3(0, 0, 0.05));
  s.config.duration_max = 2.0;
  const auto log = run(s.config, track, s.plan);
  for (const auto& r : log.records) {
    EXPECT_EQ(r.mode, Mode::FreeDrive);
    EXPECT_EQ(r.q, s.config.initial_q);
  }
}

TEST(Run, DwellHoldsAtWaypoint) {
  auto s = calibration();
  s.track = static_hand(Vec3(10, 10, 10));
  s.plan.dwell_s = 1.0;
  const auto with = run(s.config, s.track, s.plan);
  s.plan.dwell_s = 0.0;
  const auto without = run(s.config, s.track, s.plan);
  EXPECT_EQ(with.records.size(), without.records.size() + 10);
}

TEST(TcpVelocityEstimate, Arithmetic) {
  EXPECT_EQ(tcp_velocity_estimate(Vec3(1, 2, 3), Vec3(1, 2, 3), 0.1), Vec3::Zero());
  EXPECT_NEAR((tcp_velocity_estimate(Vec3::Zero(), Vec3(0.02, 0, 0), 0.1) - Vec3(0.2, 0, 0)).norm(), 0.0,
              1e-15);
}

TEST(TcpVelocityEstimate, MatchesCommandWhenUnclamped) {
  auto s = calibration();
  s.config.dt = 1e-5;
  s.config.damping = 1e-6;
  auto st = initial_state(s.config, s.track);
  for (int k = 0; k < 20; ++k) {
    const auto out = sim_step(st, s.config, s.track, s.plan);
    const Vec3 est = tcp_velocity_estimate(st.tcp.position, out.state.tcp.position, s.config.dt);
    EXPECT_LT((est - out.record.v_cmd).norm(), 1e-6);
    st = out.state;
  }
}

TEST(ObstacleTrack, PiecewiseInterpolatesAndHolds) {
  ObstacleTrack t;
  t.source = PiecewiseTrack{{{0.0, Vec3(0, 0, 0)}, {2.0, Vec3(2, 0, 0)}, {4.0, Vec3(2, 2, 0)}}};
  EXPECT_NO_THROW(t.validate());
  EXPECT_EQ(t.sample(-1.0).position, Vec3(0, 0, 0));
  EXPECT_NEAR((t.sample(1.0).position - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((t.sample(3.0).position - Vec3(2, 1, 0)).norm(), 0.0, 1e-15);
  EXPECT_EQ(t.sample(10.0).position, Vec3(2, 2, 0));
}

TEST(ObstacleTrack, RejectsNonIncreasingTimestamps) {
  ObstacleTrack t;
  t.source = PiecewiseTrack{{{0.0, Vec3::Zero()}, {0.0, Vec3::Ones()}}};
  EXPECT_THROW(t.validate(), apf::ValidationError);
}

TEST(ObstacleTrack, LiveDefaultsFarAway) {
  ObstacleTrack t;
  t.source = LiveTrack{};
  EXPECT_EQ(t.sample(0.0).position, Vec3(10, 10, 10));
  auto cell = std::make_shared<LiveHandCell>(Vec3(10, 10, 10));
  t.source = LiveTrack{Vec3(10, 10, 10), cell};
  cell->set(Vec3(1, 2, 3), Vec3(0.1, 0, 0));
  EXPECT_EQ(t.sample(0.0).position, Vec3(1, 2, 3));
  EXPECT_TRUE(cell->take().drag);
  EXPECT_FALSE(cell->take().drag);
  EXPECT_EQ(cell->get().position, Vec3(1, 2, 3));
}

TEST(SimConfig, Validation) {
  auto s = calibration();
  auto c = s.config;
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), apf::ValidationError);
  c = s.config;
  c.initial_q[2] = 10.0;
  EXPECT_THROW(c.validate(), apf::ValidationError);
  TaskPlan p;
  EXPECT_THROW(p.validate(), apf::ValidationError);
}

}  // namespace

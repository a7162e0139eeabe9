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

#include <apf/apf_controller.hpp>
#include <apf/common.hpp>
#include <apf/kinematics.hpp>
#include <apf/modes.hpp>
#include <apf/supervisor.hpp>

#include <algorithm>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Fixed-step closed loop: hand sampling, supervision, control, DLS rate
// resolution, explicit Euler integration, waypoint sequencing.
namespace apf::sim {

struct HandSample {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> drag;
};

/// Latest externally supplied hand input. Writers overwrite; readers see the
/// most recent complete write.
class LiveHandCell {
 public:
  explicit LiveHandCell(const Vec3& initial) : sample_{initial, std::nullopt} {}

  void set(const Vec3& position, const std::optional<Vec3>& drag) {
    std::lock_guard lock(mutex_);
    sample_ = {position, drag};
    ++sequence_;
  }

  HandSample get() const {
    std::lock_guard lock(mutex_);
    return sample_;
  }

  /// Snapshot for one tick: the position is held, the drag is consumed.
  HandSample take() {
    std::lock_guard lock(mutex_);
    HandSample out = sample_;
    sample_.drag.reset();
    return out;
  }

  std::uint64_t sequence() const {
    std::lock_guard lock(mutex_);
    return sequence_;
  }

 private:
  mutable std::mutex mutex_;
  HandSample sample_;
  std::uint64_t sequence_ = 0;
};

struct StaticTrack {
  Vec3 point = Vec3::Zero();
  bool operator==(const StaticTrack&) const = default;
};

struct TrackPoint {
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  bool operator==(const TrackPoint&) const = default;
};

/// Linear interpolation between timestamped points, held constant outside
/// the covered interval.
struct PiecewiseTrack {
  std::vector<TrackPoint> points;
  bool operator==(const PiecewiseTrack&) const = default;
};

struct LiveTrack {
  Vec3 initial = Vec3(10.0, 10.0, 10.0);
  std::shared_ptr<LiveHandCell> cell;

  bool operator==(const LiveTrack& o) const { return initial == o.initial; }
};

struct ObstacleTrack {
  std::variant<StaticTrack, PiecewiseTrack, LiveTrack> source = StaticTrack{Vec3(10, 10, 10)};

  HandSample sample(double t) const {
    if (const auto* s = std::get_if<StaticTrack>(&source)) return {s->point, std::nullopt};
    if (const auto* live = std::get_if<LiveTrack>(&source))
      return live->cell ? live->cell->get() : HandSample{live->initial, std::nullopt};

    const auto& pts = std::get<PiecewiseTrack>(source).points;
    if (t <= pts.front().t) return {pts.front().point, std::nullopt};
    if (t >= pts.back().t) return {pts.back().point, std::nullopt};
    const auto hi = std::upper_bound(pts.begin(), pts.end(), t,
                                     [](double v, const TrackPoint& p) { return v < p.t; });
    const auto lo = hi - 1;
    const double s = (t - lo->t) / (hi->t - lo->t);
    return {lo->point + s * (hi->point - lo->point), std::nullopt};
  }

  void validate() const {
    if (const auto* s = std::get_if<StaticTrack>(&source)) {
      if (!all_finite(s->point)) throw ValidationError("track.static", "must be finite");
    } else if (const auto* p = std::get_if<PiecewiseTrack>(&source)) {
      if (p->points.empty()) throw ValidationError("track.piecewise", "needs at least one point");
      for (std::size_t i = 0; i < p->points.size(); ++i) {
        if (!std::isfinite(p->points[i].t) || !all_finite(p->points[i].point))
          throw ValidationError("track.piecewise[" + std::to_string(i) + "]", "must be finite");
        if (i > 0 && !(p->points[i].t > p->points[i - 1].t))
          throw ValidationError("track.piecewise[" + std::to_string(i) + "].t",
                                "timestamps must be strictly increasing");
      }
    } else {
      if (!all_finite(std::get<LiveTrack>(source).initial))
        throw ValidationError("track.live.initial", "must be finite");
    }
  }

  bool is_live() const { return std::holds_alternative<LiveTrack>(source); }
  bool operator==(const ObstacleTrack&) const = default;
};

struct TaskPlan {
  std::vector<Vec3> waypoints;
  double arrival_tolerance = 0.01;
  bool cycle = false;
  double dwell_s = 0.0;

  void validate() const {
    if (waypoints.empty()) throw ValidationError("plan.waypoints", "needs at least one waypoint");
    for (std::size_t i = 0; i < waypoints.size(); ++i)
      if (!all_finite(waypoints[i]))
        throw ValidationError("plan.waypoints[" + std::to_string(i) + "]", "must be finite");
    if (!(arrival_tolerance > 0.0) || !std::isfinite(arrival_tolerance))
      throw ValidationError("plan.tolerance", "must be > 0");
    if (!(dwell_s >= 0.0) || !std::isfinite(dwell_s))
      throw ValidationError("plan.dwell_s", "must be >= 0");
  }

  bool operator==(const TaskPlan&) const = default;
};

struct SimConfig {
  double dt = 0.1;
  double duration_max = 60.0;
  control::ControlGains gains;
  supervisor::Thresholds thresholds;
  kin::RobotModel robot;
  Vec6 initial_q = Vec6::Zero();
  double damping = 0.01;     // DLS lambda
  double compliance = 1.0;   // free-drive drag scaling

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("sim.dt", "must be > 0");
    if (!(duration_max > 0.0) || !std::isfinite(duration_max))
      throw ValidationError("sim.duration_max", "must be > 0");
    if (!(damping >= 0.0) || !std::isfinite(damping))
      throw ValidationError("sim.damping", "must be >= 0");
    if (!(compliance > 0.0) || !std::isfinite(compliance))
      throw ValidationError("sim.compliance", "must be > 0");
    gains.validate();
    thresholds.validate();
    robot.validate();
    if (!all_finite(initial_q)) throw ValidationError("sim.initial_q", "must be finite");
    if (!robot.within_limits(initial_q))
      throw ValidationError("sim.initial_q", "must lie within joint_limits_rad");
  }

  std::int64_t max_ticks() const { return std::llround(duration_max / dt); }

  bool operator==(const SimConfig&) const = default;
};

struct SimState {
  std::int64_t tick = 0;
  double t = 0.0;
  kin::JointState joints;
  kin::Pose tcp;
  Vec3 v_tcp = Vec3::Zero();  // previous commanded TCP velocity, used as v_R
  Mode mode = Mode::Position;
  Vec3 hand = Vec3::Zero();
  double d_ro = 0.0;
  std::size_t active_waypoint = 0;
  std::int64_t dwell_ticks_left = -1;  // -1: not dwelling
  bool complete = false;
};

/// One row of the trajectory log: the state sampled at the start of a tick
/// together with the decisions taken during that tick.
struct TickRecord {
  double t = 0.0;
  Vec6 q = Vec6::Zero();
  Vec3 tcp = Vec3::Zero();
  Vec3 v_cmd = Vec3::Zero();
  Mode mode = Mode::Position;
  double d_ro = 0.0;
  std::optional<ObstacleKind> cls;
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  std::int64_t waypoint = 0;

  bool operator==(const TickRecord&) const = default;
};

struct TrajectoryLog {
  double dt = 0.1;
  std::vector<TickRecord> records;
  SimState final_state;
  std::optional<std::string> halt;  // set when the run stopped on an error
};

/// Everything a run needs: configuration, hand source and task.
struct Scenario {
  SimConfig config;
  ObstacleTrack track;
  TaskPlan plan;

  void validate() const {
    config.validate();
    track.validate();
    plan.validate();
  }
  bool operator==(const Scenario&) const = default;
};

struct StepOutcome {
  SimState state;
  TickRecord record;
};

inline Vec3 tcp_velocity_estimate(const Vec3& prev_tcp, const Vec3& cur_tcp, double dt) {
  return (cur_tcp - prev_tcp) / dt;
}

namespace detail {

inline void observe_hand(SimState& s, const ObstacleTrack& track) {
  s.hand = track.sample(s.t).position;
  s.d_ro = (s.tcp.position - s.hand).norm();
}

inline std::optional<control::ObstacleClass> classify(const SimState& s, const SimConfig& cfg) {
  if (s.d_ro < control::kCoincident) return std::nullopt;
  return control::classify_obstacle(s.v_tcp, s.tcp.position, s.hand, cfg.gains.theta_obs);
}

inline ObstacleKind kind_or_type2(const std::optional<control::ObstacleClass>& c) {
  return c ? c->kind : ObstacleKind::Type2NonImminent;
}

inline void advance_waypoint(SimState& s, const TaskPlan& plan) {
  if (++s.active_waypoint >= plan.waypoints.size()) {
    if (plan.cycle) {
      s.active_waypoint = 0;
    } else {
      s.active_waypoint = plan.waypoints.size() - 1;
      s.complete = true;
    }
  }
}

inline void update_waypoint(SimState& s, const SimConfig& cfg, const TaskPlan& plan) {
  if (s.complete) return;
  if (s.dwell_ticks_left >= 0) {
    if (--s.dwell_ticks_left <= 0) {
      s.dwell_ticks_left = -1;
      advance_waypoint(s, plan);
    }
    return;
  }
  const Vec3& wp = plan.waypoints[s.active_waypoint];
  if ((s.tcp.position - wp).norm() < plan.arrival_tolerance) {
    const auto dwell = std::llround(plan.dwell_s / cfg.dt);
    if (dwell > 0)
      s.dwell_ticks_left = dwell;
    else
      advance_waypoint(s, plan);
  }
}

}  // namespace detail

inline SimState initial_state(const SimConfig& cfg, const ObstacleTrack& track) {
  SimState s;
  s.joints.q = cfg.initial_q;
  s.tcp = kin::forward_kinematics(cfg.robot, cfg.initial_q);
  detail::observe_hand(s, track);
  return s;
}

/// Advances the closed loop by one tick of cfg.dt.
inline StepOutcome sim_step(const SimState& state, const SimConfig& cfg, const ObstacleTrack& track,
                            const TaskPlan& plan) {
  SimState s = state;
  const HandSample hand = track.sample(s.t);
  s.hand = hand.position;
  s.d_ro = (s.tcp.position - s.hand).norm();

  const auto cls = detail::classify(s, cfg);
  const Mode mode =
      supervisor::step_mode(s.mode, s.d_ro, detail::kind_or_type2(cls), cfg.thresholds);

  TickRecord rec;
  rec.t = s.t;
  rec.q = s.joints.q;
  rec.tcp = s.tcp.position;
  rec.mode = mode;
  rec.d_ro = s.d_ro;
  if (cls) rec.cls = cls->kind;
  rec.waypoint = static_cast<std::int64_t>(s.active_waypoint);

  Vec3 v_cmd;
  if (mode == Mode::FreeDrive) {
    v_cmd = supervisor::free_drive_update(s.tcp.position, hand.drag, cfg.compliance,
                                          cfg.gains.v_max);
  } else {
    control::ControlInputs in;
    in.x_r = s.tcp.position;
    in.v_r = s.v_tcp;
    in.x_g = plan.waypoints[s.active_waypoint];
    in.x_o = s.hand;
    const auto cmd = control::control_tick(in, cfg.gains, mode);
    v_cmd = cmd.v_cmd;
    if (cmd.breakdown) {
      rec.f1 = cmd.breakdown->f_rep1.norm();
      rec.f2 = cmd.breakdown->f_rep2.norm();
      rec.f3 = cmd.breakdown->f_rep3.norm();
    }
  }
  rec.v_cmd = v_cmd;

  Vec6 task = Vec6::Zero();
  task.head<3>() = v_cmd;
  Vec6 q_dot = kin::solve_joint_rates(kin::jacobian(cfg.robot, s.joints.q), task, cfg.damping);
  double scale = 1.0;
  for (int i = 0; i < kin::kNumJoints; ++i)
    scale = std::min(scale, cfg.robot.rate_limits[i] / std::max(std::abs(q_dot[i]), 1e-300));
  q_dot *= scale;

  const Vec6 q_next = s.joints.q + q_dot * cfg.dt;
  for (int i = 0; i < kin::kNumJoints; ++i)
    if (!cfg.robot.joint_limits[i].contains(q_next[i])) throw JointLimitViolation(i, q_next[i]);

  s.joints.q = q_next;
  s.joints.q_dot = q_dot;
  s.tcp = kin::forward_kinematics(cfg.robot, q_next);
  s.v_tcp = v_cmd;
  s.mode = mode;
  s.tick += 1;
  s.t = static_cast<double>(s.tick) * cfg.dt;
  detail::update_waypoint(s, cfg, plan);
  detail::observe_hand(s, track);
  return {s, rec};
}

/// Record describing a finished plan: the final pose, no command, and the
/// waypoint column set one past the last index.
inline TickRecord terminal_record(const SimState& s, const SimConfig& cfg, const TaskPlan& plan) {
  TickRecord rec;
  rec.t = s.t;
  rec.q = s.joints.q;
  rec.tcp = s.tcp.position;
  rec.d_ro = s.d_ro;
  const auto cls = detail::classify(s, cfg);
  if (cls) rec.cls = cls->kind;
  rec.mode = supervisor::step_mode(s.mode, s.d_ro, detail::kind_or_type2(cls), cfg.thresholds);
  rec.waypoint = static_cast<std::int64_t>(plan.waypoints.size());
  return rec;
}

/// Steps until the plan completes (non-cycling plans) or duration_max is
/// exhausted. Runtime errors stop the run and are reported in log.halt
/// alongside the partial log.
inline TrajectoryLog run(const SimConfig& cfg, const ObstacleTrack& track, const TaskPlan& plan) {
  TrajectoryLog log;
  log.dt = cfg.dt;
  SimState s = initial_state(cfg, track);
  const auto n = cfg.max_ticks();
  log.records.reserve(static_cast<std::size_t>(std::min<std::int64_t>(n + 1, 1 << 20)));
  try {
    for (std::int64_t k = 0; k < n && !s.complete; ++k) {
      auto out = sim_step(s, cfg, track, plan);
      log.records.push_back(out.record);
      s = std::move(out.state);
    }
    if (s.complete) log.records.push_back(terminal_record(s, cfg, plan));
  } catch (const JointLimitViolation& e) {
    log.halt = std::string("JointLimitViolation: ") + e.what();
  } catch (const NumericalFailure& e) {
    log.halt = std::string("NumericalFailure: ") + e.what();
  }
  log.final_state = s;
  return log;
}

}  // namespace apf::sim

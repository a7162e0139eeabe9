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
#include <apf/simulator.hpp>

#include <algorithm>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

// Scripted reproductions of the calibration sweeps and the two
// human-robot tasks, plus the metrics used to compare runs.
namespace apf::exp {

struct MetricsReport {
  double min_d_ro = 0.0;
  double path_length = 0.0;
  double duration = 0.0;
  double time_in_avoidance = 0.0;
  double time_in_freedrive = 0.0;
  int mode_switch_count = 0;
  int reached_goals = 0;
  // d_ro and time of the first tick that left position control.
  std::optional<double> avoidance_onset_d_ro;
  std::optional<double> avoidance_onset_t;

  bool operator==(const MetricsReport&) const = default;
};

namespace detail {

// Evaluates fn(0..n-1) on worker threads, at most hardware_concurrency at a
// time, and returns the results in index order.
template <typename Fn>
auto ordered_parallel(std::size_t n, Fn fn) {
  using T = decltype(fn(std::size_t{0}));
  const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += width) {
    std::vector<std::future<T>> jobs;
    for (std::size_t i = begin; i < std::min(n, begin + width); ++i)
      jobs.push_back(std::async(std::launch::async, fn, i));
    for (auto& j : jobs) out.push_back(j.get());
  }
  return out;
}

}  // namespace detail

inline MetricsReport compute_metrics(std::span<const sim::TickRecord> records, double dt) {
  if (records.empty()) throw EmptyLog();
  MetricsReport m;
  m.min_d_ro = records.front().d_ro;
  int avoid = 0;
  int free = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    m.min_d_ro = std::min(m.min_d_ro, r.d_ro);
    if (is_avoidance(r.mode)) ++avoid;
    if (r.mode == Mode::FreeDrive) ++free;
    if (r.mode != Mode::Position && !m.avoidance_onset_d_ro) {
      m.avoidance_onset_d_ro = r.d_ro;
      m.avoidance_onset_t = r.t;
    }
    if (i == 0) continue;
    const auto& p = records[i - 1];
    m.path_length += (r.tcp - p.tcp).norm();
    if (r.mode != p.mode) ++m.mode_switch_count;
    if (r.waypoint != p.waypoint) ++m.reached_goals;
  }
  m.duration = records.back().t - records.front().t;
  m.time_in_avoidance = dt * avoid;
  m.time_in_freedrive = dt * free;
  return m;
}

inline MetricsReport compute_metrics(const sim::TrajectoryLog& log) {
  return compute_metrics(log.records, log.dt);
}

enum class SweepParameter { ThetaObs, DAt };

struct SweepSpec {
  SweepParameter parameter = SweepParameter::ThetaObs;
  std::vector<double> values;  // degrees for ThetaObs, meters for DAt
  sim::Scenario base;

  void validate() const {
    if (values.size() < 2) throw ValidationError("values", "a sweep needs at least 2 values");
    for (double v : values) {
      if (parameter == SweepParameter::ThetaObs && !(v > 0.0 && v < 90.0))
        throw ValidationError("values", "theta_obs_deg must lie in (0, 90)");
      if (parameter == SweepParameter::DAt && !(v > base.config.thresholds.d_act))
        throw ValidationError("values", "d_at_m must exceed d_act_m");
    }
    base.validate();
  }
};

struct SweepRun {
  double value = 0.0;
  MetricsReport report;
  sim::TrajectoryLog log;
};

inline sim::Scenario with_parameter(sim::Scenario s, SweepParameter p, double value) {
  if (p == SweepParameter::ThetaObs)
    s.config.gains.theta_obs = deg2rad(value);
  else
    s.config.thresholds.d_at = value;
  return s;
}

/// Runs every value on its own copy of the scenario (in parallel) and
/// returns the results in input order.
inline std::vector<SweepRun> run_sweep(SweepParameter p, std::span<const double> values,
                                       const sim::Scenario& base) {
  return detail::ordered_parallel(values.size(), [&](std::size_t i) {
    const auto s = with_parameter(base, p, values[i]);
    s.validate();
    SweepRun out;
    out.value = values[i];
    out.log = sim::run(s.config, s.track, s.plan);
    out.report = compute_metrics(out.log);
    return out;
  });
}

inline std::vector<SweepRun> run_sweep(const SweepSpec& spec) {
  spec.validate();
  return run_sweep(spec.parameter, spec.values, spec.base);
}

/// Threshold-angle sweep with the avoidance threshold held at 0.2 m.
inline std::vector<SweepRun> run_theta_sweep(sim::Scenario base, std::span<const double> values_deg) {
  base.config.thresholds.d_at = 0.2;
  return run_sweep(SweepParameter::ThetaObs, values_deg, base);
}

/// Avoidance-threshold sweep with the threshold angle held at 45 degrees.
inline std::vector<SweepRun> run_dat_sweep(sim::Scenario base, std::span<const double> values_m) {
  base.config.gains.theta_obs = deg2rad(45.0);
  return run_sweep(SweepParameter::DAt, values_m, base);
}

struct TaskResult {
  MetricsReport report;
  sim::TrajectoryLog log;
};

/// Expands a cycling plan into `cycles` explicit rounds so the run ends.
inline sim::TaskPlan unroll_cycles(const sim::TaskPlan& plan, int cycles) {
  if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
  sim::TaskPlan out = plan;
  out.cycle = false;
  out.waypoints.clear();
  for (int c = 0; c < cycles; ++c)
    out.waypoints.insert(out.waypoints.end(), plan.waypoints.begin(), plan.waypoints.end());
  return out;
}

inline void require_shared_workspace_thresholds(const sim::SimConfig& cfg) {
  const auto& th = cfg.thresholds;
  if (th.d_at != 0.2 || th.d_act != 0.1 || th.d_dct != 0.2 ||
      std::abs(cfg.gains.theta_obs - deg2rad(45.0)) > 1e-12)
    throw std::invalid_argument(
        "task runs expect d_at = 0.2 m, d_act = 0.1 m, d_dct = 0.2 m, theta_obs = 45 deg");
}

inline sim::Scenario triangle_scenario(sim::Scenario scenario, const sim::ObstacleTrack& hand,
                                       int cycles) {
  scenario.track = hand;
  scenario.plan = unroll_cycles(scenario.plan, cycles);
  return scenario;
}

/// Runs the cycling waypoint triangle for a fixed number of rounds.
inline TaskResult run_triangle_task(const sim::Scenario& scenario, const sim::ObstacleTrack& hand,
                                    int cycles = 2) {
  require_shared_workspace_thresholds(scenario.config);
  const auto s = triangle_scenario(scenario, hand, cycles);
  s.validate();
  TaskResult out;
  out.log = sim::run(s.config, s.track, s.plan);
  out.report = compute_metrics(out.log);
  return out;
}

struct PickPlaceResult {
  MetricsReport report;
  sim::TrajectoryLog log;
  std::vector<MetricsReport> subplans;  // one per (pick, place) pair that was started
  int completed_subplans = 0;
};

/// Waypoints are consumed pairwise as (pick, place); the plan dwell stands in
/// for the gripper action at each of them.
inline PickPlaceResult run_pick_place_task(const sim::Scenario& scenario,
                                           const sim::ObstacleTrack& hand) {
  require_shared_workspace_thresholds(scenario.config);
  if (scenario.plan.waypoints.size() % 2 != 0 || scenario.plan.cycle)
    throw std::invalid_argument("pick-and-place plans are non-cycling (pick, place) pairs");
  sim::Scenario s = scenario;
  s.track = hand;
  s.validate();

  PickPlaceResult out;
  out.log = sim::run(s.config, s.track, s.plan);
  out.report = compute_metrics(out.log);

  const auto& recs = out.log.records;
  const auto n_sub = static_cast<std::int64_t>(s.plan.waypoints.size() / 2);
  for (std::int64_t k = 0; k < n_sub; ++k) {
    auto first = std::find_if(recs.begin(), recs.end(),
                              [k](const sim::TickRecord& r) { return r.waypoint / 2 == k; });
    if (first == recs.end()) break;
    auto last = std::find_if(first, recs.end(),
                             [k](const sim::TickRecord& r) { return r.waypoint / 2 != k; });
    const bool finished = last != recs.end();
    if (finished) ++last;  // include the tick that reached the place pose
    out.subplans.push_back(
        compute_metrics(std::span(recs).subspan(first - recs.begin(), last - first), out.log.dt));
    if (finished) ++out.completed_subplans;
  }
  return out;
}

struct RandomTrackSpec {
  Vec3 box_min = Vec3(-0.6, 0.4, 0.3);
  Vec3 box_max = Vec3(0.6, 1.2, 1.1);
  double speed_min = 0.1;
  double speed_max = 1.0;
  double start_clearance = 0.3;  // first hand point keeps this far from the initial TCP
  double duration = 40.0;
};

/// Piecewise-linear hand motion between uniformly drawn points of the box,
/// each leg at a uniformly drawn constant speed.
inline sim::PiecewiseTrack random_hand_track(std::mt19937_64& rng, const RandomTrackSpec& spec,
                                             const Vec3& initial_tcp) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_point = [&] {
    Vec3 p;
    for (int i = 0; i < 3; ++i) p[i] = spec.box_min[i] + unit(rng) * (spec.box_max[i] - spec.box_min[i]);
    return p;
  };
  sim::PiecewiseTrack track;
  Vec3 p = draw_point();
  while ((p - initial_tcp).norm() < spec.start_clearance) p = draw_point();
  track.points.push_back({0.0, p});
  double t = 0.0;
  while (t < spec.duration) {
    const Vec3 q = draw_point();
    const double speed = spec.speed_min + unit(rng) * (spec.speed_max - spec.speed_min);
    t += std::max((q - p).norm() / speed, 1e-3);
    track.points.push_back({t, q});
    p = q;
  }
  return track;
}

struct SafetyRun {
  sim::Scenario scenario;  // replayable as-is
  double min_d_ro = 0.0;
  bool safe = false;
};

struct SafetyOutcome {
  std::vector<SafetyRun> runs;

  std::size_t safe_count() const {
    return static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [](const SafetyRun& r) { return r.safe; }));
  }
  double safe_fraction() const {
    return runs.empty() ? 0.0 : static_cast<double>(safe_count()) / static_cast<double>(runs.size());
  }
};

/// Replays `count` seeded random hand tracks against the triangle task and
/// flags every run whose closest approach is at or below `clearance`.
inline SafetyOutcome run_random_safety(const sim::Scenario& triangle, int count, std::uint64_t seed,
                                       const RandomTrackSpec& spec = {}, double clearance = 0.02,
                                       int cycles = 2) {
  std::mt19937_64 rng(seed);
  const Vec3 tcp0 = kin::forward_kinematics(triangle.config.robot, triangle.config.initial_q).position;
  std::vector<sim::Scenario> scenarios;
  for (int i = 0; i < count; ++i) {
    sim::ObstacleTrack hand;
    hand.source = random_hand_track(rng, spec, tcp0);
    scenarios.push_back(triangle_scenario(triangle, hand, cycles));
  }
  SafetyOutcome out;
  out.runs = detail::ordered_parallel(scenarios.size(), [&](std::size_t i) {
    SafetyRun r;
    r.scenario = scenarios[i];
    const auto log = sim::run(r.scenario.config, r.scenario.track, r.scenario.plan);
    r.min_d_ro = compute_metrics(log).min_d_ro;
    r.safe = !log.halt && r.min_d_ro > clearance;
    return r;
  });
  return out;
}

}  // namespace apf::exp

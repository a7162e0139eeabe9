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
#include <apf/experiments.hpp>
#include <apf/kinematics.hpp>
#include <apf/simulator.hpp>

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

// Scenario / robot / sweep documents (YAML), trajectory logs (CSV) and
// metrics reports (YAML).
namespace apf::io {

namespace fs = std::filesystem;

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (std::isnan(v)) return ".nan";
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  // Keep a decimal point or exponent so YAML readers see a float.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

/// Degree value whose conversion back to radians reproduces `rad` exactly.
inline double exact_degrees(double rad) {
  double d = rad2deg(rad);
  if (deg2rad(d) == rad) return d;
  double lo = d;
  double hi = d;
  for (int i = 0; i < 64; ++i) {
    lo = std::nextafter(lo, -INFINITY);
    hi = std::nextafter(hi, INFINITY);
    if (deg2rad(lo) == rad) return lo;
    if (deg2rad(hi) == rad) return hi;
  }
  return d;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "': path not found or unreadable");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace detail {

[[noreturn]] inline void fail_at(const YAML::Node& node, const std::string& what) {
  const auto mark = node.Mark();
  throw ParseError(what, mark.line, mark.column);
}

inline void require_map(const YAML::Node& node, const std::string& path) {
  if (!node || !node.IsMap()) fail_at(node, path + ": expected a mapping");
}

inline void check_keys(const YAML::Node& node, const std::string& path,
                       std::initializer_list<std::string_view> allowed) {
  require_map(node, path);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) fail_at(kv.first, "unknown key '" + key + "' in " + path);
  }
}

inline double as_double(const YAML::Node& node, const std::string& path) {
  if (!node || !node.IsScalar()) fail_at(node, path + ": expected a number");
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail_at(node, path + ": expected a number");
  }
}

inline bool as_bool(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<bool>();
  } catch (const YAML::Exception&) {
    fail_at(node, path + ": expected true or false");
  }
}

inline double get_double(const YAML::Node& map, const char* key, const std::string& path,
                         double fallback) {
  const auto n = map[key];
  return n ? as_double(n, path + "." + key) : fallback;
}

inline std::vector<double> as_numbers(const YAML::Node& node, const std::string& path,
                                      std::size_t expected = 0) {
  if (!node || !node.IsSequence()) fail_at(node, path + ": expected a list of numbers");
  if (expected && node.size() != expected)
    fail_at(node, path + ": expected " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(as_double(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Vec3 as_vec3(const YAML::Node& node, const std::string& path) {
  const auto v = as_numbers(node, path, 3);
  return {v[0], v[1], v[2]};
}

inline Vec6 as_vec6(const YAML::Node& node, const std::string& path) {
  const auto v = as_numbers(node, path, 6);
  Vec6 out;
  for (int i = 0; i < 6; ++i) out[i] = v[i];
  return out;
}

inline YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line, e.mark.column);
  }
}

// Emission helpers: numbers are written as plain scalars in shortest
// round-trip form.
inline void emit(YAML::Emitter& out, double v) { out << format_double(v); }

template <typename Vec>
void emit_vec(YAML::Emitter& out, const Vec& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) emit(out, v[i]);
  out << YAML::EndSeq;
}

inline void emit_kv(YAML::Emitter& out, const char* key, double v) {
  out << YAML::Key << key << YAML::Value;
  emit(out, v);
}

}  // namespace detail

// ---------------------------------------------------------------- robot

inline kin::FixedTransform parse_transform(const YAML::Node& node, const std::string& path) {
  detail::check_keys(node, path, {"translation_m", "rotation_rpy_rad"});
  kin::FixedTransform t;
  if (node["translation_m"]) t.translation = detail::as_vec3(node["translation_m"], path + ".translation_m");
  if (node["rotation_rpy_rad"]) t.rpy = detail::as_vec3(node["rotation_rpy_rad"], path + ".rotation_rpy_rad");
  return t;
}

inline kin::RobotModel parse_robot(const YAML::Node& node, const std::string& path = "robot") {
  detail::check_keys(node, path, {"joints", "joint_limits_rad", "rate_limits_rad_s", "tcp_offset"});
  kin::RobotModel m;
  const auto joints = node["joints"];
  if (!joints || !joints.IsSequence() || joints.size() != kin::kNumJoints)
    detail::fail_at(node, path + ".joints: exactly 6 joints required");
  for (int i = 0; i < kin::kNumJoints; ++i) {
    const std::string jp = path + ".joints[" + std::to_string(i) + "]";
    const auto j = joints[i];
    detail::check_keys(j, jp, {"axis", "translation_m", "rotation_rpy_rad"});
    Vec3 axis = detail::as_vec3(j["axis"], jp + ".axis");
    if (axis.norm() > 0.0) axis.normalize();
    m.joints[i].axis = axis;
    if (j["translation_m"]) m.joints[i].origin.translation = detail::as_vec3(j["translation_m"], jp + ".translation_m");
    if (j["rotation_rpy_rad"]) m.joints[i].origin.rpy = detail::as_vec3(j["rotation_rpy_rad"], jp + ".rotation_rpy_rad");
  }
  if (const auto lim = node["joint_limits_rad"]) {
    if (!lim.IsSequence() || lim.size() != kin::kNumJoints)
      detail::fail_at(lim, path + ".joint_limits_rad: 6 [min, max] pairs required");
    for (int i = 0; i < kin::kNumJoints; ++i) {
      const auto pair = detail::as_numbers(lim[i], path + ".joint_limits_rad[" + std::to_string(i) + "]", 2);
      m.joint_limits[i] = {pair[0], pair[1]};
    }
  }
  if (node["rate_limits_rad_s"]) m.rate_limits = detail::as_vec6(node["rate_limits_rad_s"], path + ".rate_limits_rad_s");
  if (node["tcp_offset"]) m.tcp_offset = parse_transform(node["tcp_offset"], path + ".tcp_offset");
  m.validate();
  return m;
}

inline kin::RobotModel load_robot(const fs::path& path) {
  return parse_robot(detail::load_yaml(read_text_file(path)), "robot");
}

inline void emit_transform(YAML::Emitter& out, const kin::FixedTransform& t) {
  out << YAML::BeginMap;
  out << YAML::Key << "translation_m" << YAML::Value;
  detail::emit_vec(out, t.translation);
  out << YAML::Key << "rotation_rpy_rad" << YAML::Value;
  detail::emit_vec(out, t.rpy);
  out << YAML::EndMap;
}

inline void emit_robot(YAML::Emitter& out, const kin::RobotModel& m) {
  out << YAML::BeginMap;
  out << YAML::Key << "joints" << YAML::Value << YAML::BeginSeq;
  for (const auto& j : m.joints) {
    out << YAML::BeginMap;
    out << YAML::Key << "axis" << YAML::Value;
    detail::emit_vec(out, j.axis);
    out << YAML::Key << "translation_m" << YAML::Value;
    detail::emit_vec(out, j.origin.translation);
    out << YAML::Key << "rotation_rpy_rad" << YAML::Value;
    detail::emit_vec(out, j.origin.rpy);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "joint_limits_rad" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : m.joint_limits) detail::emit_vec(out, Eigen::Vector2d(l.min, l.max));
  out << YAML::EndSeq;
  out << YAML::Key << "rate_limits_rad_s" << YAML::Value;
  detail::emit_vec(out, m.rate_limits);
  out << YAML::Key << "tcp_offset" << YAML::Value;
  emit_transform(out, m.tcp_offset);
  out << YAML::EndMap;
}

// ---------------------------------------------------------------- track

inline sim::ObstacleTrack parse_track(const YAML::Node& node, const fs::path& base_dir,
                                      const std::string& path = "track") {
  detail::check_keys(node, path, {"static", "piecewise", "live", "file"});
  if (node.size() != 1) detail::fail_at(node, path + ": exactly one of static | piecewise | live | file");
  sim::ObstacleTrack track;
  if (const auto f = node["file"]) {
    const fs::path file = base_dir / f.as<std::string>();
    return parse_track(detail::load_yaml(read_text_file(file)), file.parent_path(), path);
  }
  if (const auto s = node["static"]) {
    track.source = sim::StaticTrack{detail::as_vec3(s, path + ".static")};
  } else if (const auto p = node["piecewise"]) {
    if (!p.IsSequence()) detail::fail_at(p, path + ".piecewise: expected a list of {t, pos}");
    sim::PiecewiseTrack pw;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const std::string ip = path + ".piecewise[" + std::to_string(i) + "]";
      detail::check_keys(p[i], ip, {"t", "pos"});
      pw.points.push_back({detail::as_double(p[i]["t"], ip + ".t"), detail::as_vec3(p[i]["pos"], ip + ".pos")});
    }
    track.source = std::move(pw);
  } else {
    const auto l = node["live"];
    sim::LiveTrack live;
    if (l && l.IsMap()) {
      detail::check_keys(l, path + ".live", {"initial"});
      if (l["initial"]) live.initial = detail::as_vec3(l["initial"], path + ".live.initial");
    }
    track.source = live;
  }
  track.validate();
  return track;
}

inline void emit_track(YAML::Emitter& out, const sim::ObstacleTrack& track) {
  out << YAML::BeginMap;
  if (const auto* s = std::get_if<sim::StaticTrack>(&track.source)) {
    out << YAML::Key << "static" << YAML::Value;
    detail::emit_vec(out, s->point);
  } else if (const auto* p = std::get_if<sim::PiecewiseTrack>(&track.source)) {
    out << YAML::Key << "piecewise" << YAML::Value << YAML::BeginSeq;
    for (const auto& pt : p->points) {
      out << YAML::Flow << YAML::BeginMap;
      detail::emit_kv(out, "t", pt.t);
      out << YAML::Key << "pos" << YAML::Value;
      detail::emit_vec(out, pt.point);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  } else {
    out << YAML::Key << "live" << YAML::Value << YAML::BeginMap << YAML::Key << "initial"
        << YAML::Value;
    detail::emit_vec(out, std::get<sim::LiveTrack>(track.source).initial);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
}

// ---------------------------------------------------------------- scenario

inline control::ControlGains parse_gains(const YAML::Node& node) {
  detail::check_keys(node, "gains",
                     {"k_pc1", "k_pc2", "k_ca1", "k_ca2", "k_ca3", "k_rep", "tau_per_m",
                      "theta_obs_deg", "v_max_m_s"});
  control::ControlGains g;
  g.k_pc1 = detail::get_double(node, "k_pc1", "gains", g.k_pc1);
  g.k_pc2 = detail::get_double(node, "k_pc2", "gains", g.k_pc2);
  g.k_ca1 = detail::get_double(node, "k_ca1", "gains", g.k_ca1);
  g.k_ca2 = detail::get_double(node, "k_ca2", "gains", g.k_ca2);
  g.k_ca3 = detail::get_double(node, "k_ca3", "gains", g.k_ca3);
  g.k_rep = detail::get_double(node, "k_rep", "gains", g.k_rep);
  g.tau = detail::get_double(node, "tau_per_m", "gains", g.tau);
  g.theta_obs = deg2rad(detail::get_double(node, "theta_obs_deg", "gains", rad2deg(g.theta_obs)));
  g.v_max = detail::get_double(node, "v_max_m_s", "gains", g.v_max);
  g.validate();
  return g;
}

inline supervisor::Thresholds parse_thresholds(const YAML::Node& node) {
  detail::check_keys(node, "thresholds", {"d_at_m", "d_act_m", "d_dct_m"});
  supervisor::Thresholds th;
  th.d_at = detail::get_double(node, "d_at_m", "thresholds", th.d_at);
  th.d_act = detail::get_double(node, "d_act_m", "thresholds", th.d_act);
  th.d_dct = detail::get_double(node, "d_dct_m", "thresholds", th.d_dct);
  th.validate();
  return th;
}

inline sim::TaskPlan parse_plan(const YAML::Node& node) {
  detail::check_keys(node, "plan", {"waypoints", "tolerance", "cycle", "dwell_s"});
  sim::TaskPlan plan;
  const auto wps = node["waypoints"];
  if (!wps || !wps.IsSequence()) detail::fail_at(node, "plan.waypoints: expected a list of [x, y, z]");
  for (std::size_t i = 0; i < wps.size(); ++i)
    plan.waypoints.push_back(detail::as_vec3(wps[i], "plan.waypoints[" + std::to_string(i) + "]"));
  plan.arrival_tolerance = detail::get_double(node, "tolerance", "plan", plan.arrival_tolerance);
  if (node["cycle"]) plan.cycle = detail::as_bool(node["cycle"], "plan.cycle");
  plan.dwell_s = detail::get_double(node, "dwell_s", "plan", plan.dwell_s);
  plan.validate();
  return plan;
}

/// Parses a scenario document. Relative `file:` references resolve against
/// base_dir. Throws ParseError for malformed documents and ValidationError for
/// well-formed documents that break a constraint.
inline sim::Scenario parse_scenario_text(const std::string& text, const fs::path& base_dir = ".") {
  const auto root = detail::load_yaml(text);
  detail::check_keys(root, "scenario", {"robot", "gains", "thresholds", "sim", "plan", "track"});
  sim::Scenario s;

  const auto robot = root["robot"];
  if (!robot) detail::fail_at(root, "scenario: missing 'robot'");
  detail::require_map(robot, "robot");
  if (robot["file"]) {
    detail::check_keys(robot, "robot", {"file"});
    const fs::path file = base_dir / robot["file"].as<std::string>();
    s.config.robot = parse_robot(detail::load_yaml(read_text_file(file)), "robot");
  } else {
    s.config.robot = parse_robot(robot, "robot");
  }

  if (root["gains"]) s.config.gains = parse_gains(root["gains"]);
  if (root["thresholds"]) s.config.thresholds = parse_thresholds(root["thresholds"]);

  const auto simn = root["sim"];
  if (!simn) detail::fail_at(root, "scenario: missing 'sim'");
  detail::check_keys(simn, "sim", {"dt", "duration_max", "initial_q", "damping", "compliance"});
  s.config.dt = detail::get_double(simn, "dt", "sim", s.config.dt);
  s.config.duration_max = detail::get_double(simn, "duration_max", "sim", s.config.duration_max);
  if (!simn["initial_q"]) detail::fail_at(simn, "sim: missing 'initial_q'");
  s.config.initial_q = detail::as_vec6(simn["initial_q"], "sim.initial_q");
  s.config.damping = detail::get_double(simn, "damping", "sim", s.config.damping);
  s.config.compliance = detail::get_double(simn, "compliance", "sim", s.config.compliance);

  if (!root["plan"]) detail::fail_at(root, "scenario: missing 'plan'");
  s.plan = parse_plan(root["plan"]);
  if (!root["track"]) detail::fail_at(root, "scenario: missing 'track'");
  s.track = parse_track(root["track"], base_dir);

  s.validate();
  return s;
}

inline sim::Scenario parse_scenario(const fs::path& path) {
  return parse_scenario_text(read_text_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

/// Self-contained document: the robot and track are always written inline.
inline std::string serialize_scenario(const sim::Scenario& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "robot" << YAML::Value;
  emit_robot(out, s.config.robot);

  const auto& g = s.config.gains;
  out << YAML::Key << "gains" << YAML::Value << YAML::BeginMap;
  detail::emit_kv(out, "k_pc1", g.k_pc1);
  detail::emit_kv(out, "k_pc2", g.k_pc2);
  detail::emit_kv(out, "k_ca1", g.k_ca1);
  detail::emit_kv(out, "k_ca2", g.k_ca2);
  detail::emit_kv(out, "k_ca3", g.k_ca3);
  detail::emit_kv(out, "k_rep", g.k_rep);
  detail::emit_kv(out, "tau_per_m", g.tau);
  detail::emit_kv(out, "theta_obs_deg", exact_degrees(g.theta_obs));
  detail::emit_kv(out, "v_max_m_s", g.v_max);
  out << YAML::EndMap;

  const auto& th = s.config.thresholds;
  out << YAML::Key << "thresholds" << YAML::Value << YAML::BeginMap;
  detail::emit_kv(out, "d_at_m", th.d_at);
  detail::emit_kv(out, "d_act_m", th.d_act);
  detail::emit_kv(out, "d_dct_m", th.d_dct);
  out << YAML::EndMap;

  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  detail::emit_kv(out, "dt", s.config.dt);
  detail::emit_kv(out, "duration_max", s.config.duration_max);
  out << YAML::Key << "initial_q" << YAML::Value;
  detail::emit_vec(out, s.config.initial_q);
  detail::emit_kv(out, "damping", s.config.damping);
  detail::emit_kv(out, "compliance", s.config.compliance);
  out << YAML::EndMap;

  out << YAML::Key << "plan" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "waypoints" << YAML::Value << YAML::BeginSeq;
  for (const auto& w : s.plan.waypoints) detail::emit_vec(out, w);
  out << YAML::EndSeq;
  detail::emit_kv(out, "tolerance", s.plan.arrival_tolerance);
  out << YAML::Key << "cycle" << YAML::Value << s.plan.cycle;
  detail::emit_kv(out, "dwell_s", s.plan.dwell_s);
  out << YAML::EndMap;

  out << YAML::Key << "track" << YAML::Value;
  emit_track(out, s.track);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

inline void write_scenario(const sim::Scenario& s, const fs::path& path) {
  write_text_file(path, serialize_scenario(s));
}

// ---------------------------------------------------------------- sweep spec

enum class SweepKind { ThetaObs, DAt, RandomTrack };

struct SweepFile {
  SweepKind kind = SweepKind::ThetaObs;
  std::vector<double> values;  // ThetaObs / DAt
  int count = 200;             // RandomTrack
  std::uint64_t seed = 1;      // RandomTrack
  double clearance = 0.02;     // RandomTrack
  int cycles = 2;              // RandomTrack
  sim::Scenario base;
};

inline SweepFile parse_sweep_text(const std::string& text, const fs::path& base_dir = ".") {
  const auto root = detail::load_yaml(text);
  detail::check_keys(root, "sweep",
                     {"parameter", "values", "base_scenario", "count", "seed", "clearance_m", "cycles"});
  SweepFile out;
  const auto param = root["parameter"];
  if (!param) detail::fail_at(root, "sweep: missing 'parameter'");
  const auto p = param.as<std::string>();
  if (p == "theta_obs_deg")
    out.kind = SweepKind::ThetaObs;
  else if (p == "d_at_m")
    out.kind = SweepKind::DAt;
  else if (p == "random_track")
    out.kind = SweepKind::RandomTrack;
  else
    detail::fail_at(param, "sweep.parameter: expected theta_obs_deg | d_at_m | random_track");

  if (!root["base_scenario"]) detail::fail_at(root, "sweep: missing 'base_scenario'");
  out.base = parse_scenario(base_dir / root["base_scenario"].as<std::string>());

  if (out.kind == SweepKind::RandomTrack) {
    if (root["count"]) out.count = static_cast<int>(detail::as_double(root["count"], "sweep.count"));
    if (root["seed"]) out.seed = root["seed"].as<std::uint64_t>();
    out.clearance = detail::get_double(root, "clearance_m", "sweep", out.clearance);
    if (root["cycles"]) out.cycles = static_cast<int>(detail::as_double(root["cycles"], "sweep.cycles"));
    if (out.count < 1) throw ValidationError("count", "must be >= 1");
    if (out.cycles < 1) throw ValidationError("cycles", "must be >= 1");
  } else {
    if (!root["values"]) detail::fail_at(root, "sweep: missing 'values'");
    out.values = detail::as_numbers(root["values"], "sweep.values");
    exp::SweepSpec spec{out.kind == SweepKind::ThetaObs ? exp::SweepParameter::ThetaObs
                                                        : exp::SweepParameter::DAt,
                        out.values, out.base};
    spec.validate();
  }
  return out;
}

inline SweepFile parse_sweep(const fs::path& path) {
  return parse_sweep_text(read_text_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------- logs

inline constexpr std::string_view kLogHeader =
    "t,q1,q2,q3,q4,q5,q6,x,y,z,vx,vy,vz,mode,d_ro,class,f1,f2,f3,waypoint";

inline std::string format_log(const sim::TrajectoryLog& log) {
  std::string out(kLogHeader);
  out += '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
    out += ',';
  };
  for (const auto& r : log.records) {
    num(r.t);
    for (int i = 0; i < 6; ++i) num(r.q[i]);
    for (int i = 0; i < 3; ++i) num(r.tcp[i]);
    for (int i = 0; i < 3; ++i) num(r.v_cmd[i]);
    out += to_string(r.mode);
    out += ',';
    num(r.d_ro);
    out += r.cls ? to_string(*r.cls) : std::string_view("none");
    out += ',';
    num(r.f1);
    num(r.f2);
    num(r.f3);
    out += std::to_string(r.waypoint);
    out += '\n';
  }
  return out;
}

inline void write_log(const sim::TrajectoryLog& log, const fs::path& path) {
  write_text_file(path, format_log(log));
}

inline sim::TrajectoryLog parse_log_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kLogHeader)
    throw ParseError("log header does not match the expected column names", 0, 0);
  sim::TrajectoryLog log;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 20) throw ParseError("expected 20 columns", line_no, 0);
    std::size_t col = 0;
    auto num = [&]() {
      const auto& c = cells[col];
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw ParseError("bad number '" + c + "'", line_no, static_cast<int>(col));
      ++col;
      return v;
    };
    sim::TickRecord r;
    r.t = num();
    for (int i = 0; i < 6; ++i) r.q[i] = num();
    for (int i = 0; i < 3; ++i) r.tcp[i] = num();
    for (int i = 0; i < 3; ++i) r.v_cmd[i] = num();
    const auto mode = mode_from_string(cells[col]);
    if (!mode) throw ParseError("bad mode '" + cells[col] + "'", line_no, static_cast<int>(col));
    r.mode = *mode;
    ++col;
    r.d_ro = num();
    const auto& cls = cells[col];
    if (cls == "type1")
      r.cls = ObstacleKind::Type1Imminent;
    else if (cls == "type2")
      r.cls = ObstacleKind::Type2NonImminent;
    else if (cls != "none")
      throw ParseError("bad class '" + cls + "'", line_no, static_cast<int>(col));
    ++col;
    r.f1 = num();
    r.f2 = num();
    r.f3 = num();
    r.waypoint = static_cast<std::int64_t>(num());
    log.records.push_back(r);
  }
  log.dt = log.records.size() >= 2 ? log.records[1].t - log.records[0].t : 0.0;
  return log;
}

inline sim::TrajectoryLog read_log(const fs::path& path) { return parse_log_text(read_text_file(path)); }

/// Plot-ready XY projection of the TCP path.
inline std::string format_xy(const sim::TrajectoryLog& log) {
  std::string out = "x,y\n";
  char buf[96];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r.tcp.x(), r.tcp.y());
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------- reports

inline void emit_metrics(YAML::Emitter& out, const exp::MetricsReport& m) {
  out << YAML::BeginMap;
  detail::emit_kv(out, "min_d_ro", m.min_d_ro);
  detail::emit_kv(out, "path_length", m.path_length);
  detail::emit_kv(out, "duration", m.duration);
  detail::emit_kv(out, "time_in_avoidance", m.time_in_avoidance);
  detail::emit_kv(out, "time_in_freedrive", m.time_in_freedrive);
  out << YAML::Key << "mode_switch_count" << YAML::Value << m.mode_switch_count;
  out << YAML::Key << "reached_goals" << YAML::Value << m.reached_goals;
  out << YAML::Key << "avoidance_onset_d_ro" << YAML::Value;
  if (m.avoidance_onset_d_ro) detail::emit(out, *m.avoidance_onset_d_ro); else out << YAML::Null;
  out << YAML::Key << "avoidance_onset_t" << YAML::Value;
  if (m.avoidance_onset_t) detail::emit(out, *m.avoidance_onset_t); else out << YAML::Null;
  out << YAML::EndMap;
}

inline exp::MetricsReport parse_metrics(const YAML::Node& node) {
  detail::check_keys(node, "metrics",
                     {"min_d_ro", "path_length", "duration", "time_in_avoidance", "time_in_freedrive",
                      "mode_switch_count", "reached_goals", "avoidance_onset_d_ro", "avoidance_onset_t"});
  exp::MetricsReport m;
  m.min_d_ro = detail::as_double(node["min_d_ro"], "metrics.min_d_ro");
  m.path_length = detail::as_double(node["path_length"], "metrics.path_length");
  m.duration = detail::as_double(node["duration"], "metrics.duration");
  m.time_in_avoidance = detail::as_double(node["time_in_avoidance"], "metrics.time_in_avoidance");
  m.time_in_freedrive = detail::as_double(node["time_in_freedrive"], "metrics.time_in_freedrive");
  m.mode_switch_count = node["mode_switch_count"].as<int>();
  m.reached_goals = node["reached_goals"].as<int>();
  if (node["avoidance_onset_d_ro"] && !node["avoidance_onset_d_ro"].IsNull())
    m.avoidance_onset_d_ro = detail::as_double(node["avoidance_onset_d_ro"], "metrics.avoidance_onset_d_ro");
  if (node["avoidance_onset_t"] && !node["avoidance_onset_t"].IsNull())
    m.avoidance_onset_t = detail::as_double(node["avoidance_onset_t"], "metrics.avoidance_onset_t");
  return m;
}

struct ReportContext {
  std::string label;
  std::optional<std::string> parameter;
  std::optional<double> value;
  std::optional<std::string> halt;
  std::optional<std::string> log_file;
};

/// Metrics plus an echo of the configuration that produced them.
inline std::string format_report(const exp::MetricsReport& m, const sim::Scenario& s,
                                 const ReportContext& ctx) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "label" << YAML::Value << ctx.label;
  if (ctx.parameter) out << YAML::Key << "parameter" << YAML::Value << *ctx.parameter;
  if (ctx.value) detail::emit_kv(out, "value", *ctx.value);
  if (ctx.log_file) out << YAML::Key << "log" << YAML::Value << *ctx.log_file;
  if (ctx.halt) out << YAML::Key << "halt" << YAML::Value << *ctx.halt;
  out << YAML::Key << "metrics" << YAML::Value;
  emit_metrics(out, m);

  out << YAML::Key << "config" << YAML::Value << YAML::BeginMap;
  const auto& g = s.config.gains;
  out << YAML::Key << "gains" << YAML::Value << YAML::BeginMap;
  detail::emit_kv(out, "k_pc1", g.k_pc1);
  detail::emit_kv(out, "k_pc2", g.k_pc2);
  detail::emit_kv(out, "k_ca1", g.k_ca1);
  detail::emit_kv(out, "k_ca2", g.k_ca2);
  detail::emit_kv(out, "k_ca3", g.k_ca3);
  detail::emit_kv(out, "k_rep", g.k_rep);
  detail::emit_kv(out, "tau_per_m", g.tau);
  detail::emit_kv(out, "theta_obs_deg", exact_degrees(g.theta_obs));
  detail::emit_kv(out, "v_max_m_s", g.v_max);
  out << YAML::EndMap;
  out << YAML::Key << "thresholds" << YAML::Value << YAML::BeginMap;
  detail::emit_kv(out, "d_at_m", s.config.thresholds.d_at);
  detail::emit_kv(out, "d_act_m", s.config.thresholds.d_act);
  detail::emit_kv(out, "d_dct_m", s.config.thresholds.d_dct);
  out << YAML::EndMap;
  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  detail::emit_kv(out, "dt", s.config.dt);
  detail::emit_kv(out, "duration_max", s.config.duration_max);
  detail::emit_kv(out, "damping", s.config.damping);
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

inline std::string format_metrics(const exp::MetricsReport& m) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "metrics" << YAML::Value;
  emit_metrics(out, m);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

inline exp::MetricsReport read_report_metrics(const fs::path& path) {
  const auto root = detail::load_yaml(read_text_file(path));
  detail::require_map(root, "report");
  return parse_metrics(root["metrics"]);
}

}  // namespace apf::io

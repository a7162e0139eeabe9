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


// apfsim: batch runs, parameter sweeps, live serving and log inspection.

#include <apf/experiments.hpp>
#include <apf/io.hpp>
#include <apf/live_bridge.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace apf;

namespace {

enum ExitCode { kOk = 0, kInputError = 1, kRuntimeError = 2 };

volatile std::sig_atomic_t g_interrupted = 0;

struct Options {
  std::string path;
  std::string out = "out";
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  unsigned short port = bridge::kDefaultPort;
  std::string host = "127.0.0.1";
  std::string static_dir;
};

void apply_overrides(sim::Scenario& s, const Options& o) {
  if (o.dt) {
    s.config.dt = *o.dt;
    s.config.validate();
  }
}

std::string value_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void say(const Options& o, const std::string& line) {
  if (!o.quiet) std::cout << line << '\n';
}

int cmd_validate(const Options& o) {
  const auto s = io::parse_scenario(o.path);
  say(o, o.path + ": ok (" + std::to_string(s.plan.waypoints.size()) + " waypoints)");
  return kOk;
}

int cmd_run(const Options& o) {
  auto s = io::parse_scenario(o.path);
  apply_overrides(s, o);
  const auto log = sim::run(s.config, s.track, s.plan);
  const std::string stem = fs::path(o.path).stem().string();
  const fs::path out(o.out);
  const auto log_file = out / (stem + ".log.csv");
  io::write_log(log, log_file);
  io::write_text_file(out / (stem + ".xy.csv"), io::format_xy(log));
  if (!log.records.empty()) {
    const auto m = exp::compute_metrics(log);
    io::write_text_file(out / (stem + ".report.yaml"),
                        io::format_report(m, s, {stem, {}, {}, log.halt, log_file.filename().string()}));
    say(o, io::format_metrics(m));
  }
  if (log.halt) {
    std::cerr << "run halted: " << *log.halt << '\n';
    return kRuntimeError;
  }
  say(o, "wrote " + log_file.string());
  return kOk;
}

int cmd_sweep(const Options& o) {
  auto spec = io::parse_sweep(o.path);
  apply_overrides(spec.base, o);
  const fs::path out(o.out);

  if (spec.kind == io::SweepKind::RandomTrack) {
    const auto seed = o.seed.value_or(spec.seed);
    const auto result = exp::run_random_safety(spec.base, spec.count, seed, {}, spec.clearance, spec.cycles);
    YAML::Emitter y;
    y << YAML::BeginMap;
    y << YAML::Key << "parameter" << YAML::Value << "random_track";
    y << YAML::Key << "seed" << YAML::Value << seed;
    y << YAML::Key << "runs" << YAML::Value << result.runs.size();
    y << YAML::Key << "safe" << YAML::Value << result.safe_count();
    y << YAML::Key << "safe_fraction" << YAML::Value << io::format_double(result.safe_fraction());
    y << YAML::Key << "clearance_m" << YAML::Value << io::format_double(spec.clearance);
    y << YAML::Key << "counterexamples" << YAML::Value << YAML::BeginSeq;
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      const auto& r = result.runs[i];
      if (r.safe) continue;
      const auto file = "counterexample_" + std::to_string(i) + ".yaml";
      io::write_scenario(r.scenario, out / "counterexamples" / file);
      y << YAML::Flow << YAML::BeginMap << YAML::Key << "run" << YAML::Value << i << YAML::Key
        << "min_d_ro" << YAML::Value << io::format_double(r.min_d_ro) << YAML::Key << "scenario"
        << YAML::Value << ("counterexamples/" + file) << YAML::EndMap;
    }
    y << YAML::EndSeq << YAML::EndMap;
    io::write_text_file(out / "safety.report.yaml", std::string(y.c_str()) + "\n");
    say(o, "safe runs: " + std::to_string(result.safe_count()) + "/" + std::to_string(result.runs.size()));
    return kOk;
  }

  const auto param = spec.kind == io::SweepKind::ThetaObs ? exp::SweepParameter::ThetaObs
                                                          : exp::SweepParameter::DAt;
  const std::string name = spec.kind == io::SweepKind::ThetaObs ? "theta_obs_deg" : "d_at_m";
  const auto runs = exp::run_sweep(exp::SweepSpec{param, spec.values, spec.base});
  int status = kOk;
  for (const auto& r : runs) {
    const std::string stem = name + "_" + value_tag(r.value);
    const auto log_file = out / (stem + ".log.csv");
    io::write_log(r.log, log_file);
    io::write_text_file(out / (stem + ".xy.csv"), io::format_xy(r.log));
    io::write_text_file(out / (stem + ".report.yaml"),
                        io::format_report(r.report, exp::with_parameter(spec.base, param, r.value),
                                          {stem, name, r.value, r.log.halt, log_file.filename().string()}));
    say(o, stem + ": min_d_ro=" + io::format_double(r.report.min_d_ro) +
               " path_length=" + io::format_double(r.report.path_length));
    if (r.log.halt) {
      std::cerr << stem << " halted: " << *r.log.halt << '\n';
      status = kRuntimeError;
    }
  }
  return status;
}

int cmd_serve(const Options& o) {
  auto s = io::parse_scenario(o.path);
  apply_overrides(s, o);
  bridge::LiveSession session(s);
  bridge::ServerOptions so;
  so.address = o.host;
  so.port = o.port;
  if (!o.static_dir.empty()) so.static_root = fs::path(o.static_dir);
  bridge::Server server(session, so);
  std::signal(SIGINT, [](int) { g_interrupted = 1; });
  std::signal(SIGTERM, [](int) { g_interrupted = 1; });
  server.start();
  say(o, "serving on ws://" + o.host + ":" + std::to_string(server.port()));
  while (!g_interrupted && !server.wait_for(std::chrono::milliseconds(200))) {
  }
  server.stop();
  if (const auto halt = server.halt_reason()) {
    std::cerr << "simulation halted: " << *halt << '\n';
    return kRuntimeError;
  }
  return kOk;
}

int cmd_metrics(const Options& o) {
  const auto log = io::read_log(o.path);
  std::cout << io::format_metrics(exp::compute_metrics(log));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"APF collision-avoidance simulator for a 6-DOF arm"};
  app.require_subcommand(0, 1);
  Options o;

  auto* run = app.add_subcommand("run", "Run a scenario and write log, XY trace and report");
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep or randomized safety batch");
  auto* serve = app.add_subcommand("serve", "Run a live-hand scenario behind a websocket endpoint");
  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario");
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from a log file");

  run->add_option("scenario", o.path, "Scenario file")->required();
  sweep->add_option("spec", o.path, "Sweep file")->required();
  serve->add_option("scenario", o.path, "Scenario file with a live track")->required();
  validate->add_option("scenario", o.path, "Scenario file")->required();
  metrics->add_option("log", o.path, "Trajectory log (CSV)")->required();

  for (auto* sub : {run, sweep}) sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  for (auto* sub : {run, sweep, serve}) sub->add_option("--dt", o.dt, "Override the time step [s]");
  sweep->add_option("--seed", o.seed, "Seed for randomized sweeps");
  serve->add_option("--port", o.port, "Listen port")->capture_default_str();
  serve->add_option("--host", o.host, "Listen address")->capture_default_str();
  serve->add_option("--static", o.static_dir, "Directory served to plain HTTP requests");
  for (auto* sub : {run, sweep, serve, validate, metrics}) sub->add_flag("--quiet", o.quiet, "Suppress progress output");

  if (argc <= 1) {
    std::cout << app.help();
    return kInputError;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*serve) return cmd_serve(o);
    if (*validate) return cmd_validate(o);
    if (*metrics) return cmd_metrics(o);
    std::cout << app.help();
    return kInputError;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kInputError;
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kInputError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const YAML::Exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kInputError;
  } catch (const EmptyLog& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

/*
 * Copyright 2026 The flapesc Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

#include "flapesc/bridge.hpp"
#include "flapesc/engine.hpp"
#include "flapesc/errors.hpp"
#include "flapesc/telemetry_io.hpp"
#include "flapesc/units.hpp"

#ifndef FLAPESC_SCENARIO_DIR
#define FLAPESC_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace flapesc;

namespace
{

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_divergence = 3;
constexpr int exit_io = 4;

int fail(int code, const char * kind, const std::string & message)
{
  std::string flat = message;
  for (char & ch : flat) {
    if (ch == '\n' || ch == '"') {
      ch = ch == '"' ? '\'' : ' ';
    }
  }
  std::fprintf(stderr, "error code=%d kind=%s message=\"%s\"\n", code, kind, flat.c_str());
  return code;
}

// Bare names like "scenario_a" resolve against the shipped scenario directory.
fs::path resolve_scenario(const std::string & arg)
{
  const fs::path p(arg);
  if (fs::exists(p)) {
    return p;
  }
  const fs::path dir(FLAPESC_SCENARIO_DIR);
  for (const auto & candidate : {dir / arg, dir / (arg + ".ini")}) {
    if (fs::exists(candidate)) {
      return candidate;
    }
  }
  throw ConfigError(fmt::format("{}: scenario file not found", arg));
}

double default_hold(const engine::TelemetryLog & log, double configured)
{
  if (log.size() < 2) {
    return configured;
  }
  const double span = log.back().t - log.front().t;
  return std::min(configured, 0.25 * span);
}

// Direction of |error| over the final 20% of the log.
const char * error_trend(const engine::TelemetryLog & log, const engine::Target & target)
{
  if (log.size() < 3) {
    return "flat";
  }
  const double from = log.back().t - 0.2 * (log.back().t - log.front().t);
  bool up = true;
  bool down = true;
  double prev = std::nan("");
  for (const auto & f : log) {
    if (f.t < from) {
      continue;
    }
    const double e = std::abs(f.z - target(f.t));
    if (!std::isnan(prev)) {
      up = up && e >= prev;
      down = down && e <= prev;
    }
    prev = e;
  }
  return up ? "growing" : (down ? "shrinking" : "mixed");
}

void print_spectrum(const engine::TelemetryLog & log, double dt, double f_min)
{
  const auto J = engine::column_J(log);
  if (J.size() < engine::min_spectrum_samples) {
    fmt::print("spectrum_peak=unavailable samples={} needed={}\n", J.size(), engine::min_spectrum_samples);
    return;
  }
  const auto p = engine::spectrum_analysis(J, dt, f_min);
  fmt::print("spectrum_peak_hz={:.6g} bin_width_hz={:.6g} peak_to_floor={:.6g}\n", p.frequency, p.bin_width, p.peak_to_floor);
}

void emit_log(const engine::TelemetryLog & log, const std::string & out)
{
  if (out.empty()) {
    const std::string text = tio::format_log(log);
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    tio::write_log(out, log);
  }
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"flapesc: extremum-seeking flapping-wing simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::string log_path;
  std::string target_arg;
  std::optional<std::uint64_t> seed;
  double band = 5.0;
  double hold = 10.0;
  double f_min = 1.0;
  double command = 0.38;
  std::uint16_t port = 8765;
  double rate = 50.0;

  auto * run = app.add_subcommand("run", "run a scenario headless");
  run->add_option("--scenario", scenario, "scenario file or shipped name")->required();
  run->add_option("--seed", seed, "noise seed override");
  run->add_option("--out", out, "telemetry CSV path (stdout when omitted)");

  auto * analyze = app.add_subcommand("analyze", "convergence and spectrum of a telemetry log");
  analyze->add_option("--log", log_path, "telemetry CSV")->required();
  analyze->add_option("--target", target_arg, "constant mm or step schedule t:z,...; default is the z_src column");
  analyze->add_option("--band", band, "convergence band, mm");
  auto * hold_opt = analyze->add_option("--hold", hold, "hold time, s; default min(10, a quarter of the log span)");
  analyze->add_option("--f-min", f_min, "lowest frequency considered for the J peak, Hz");

  auto * serve = app.add_subcommand("serve", "live bridge with wall-clock pacing");
  serve->add_option("--scenario", scenario, "scenario file or shipped name")->required();
  serve->add_option("--port", port, "websocket port");
  serve->add_option("--rate", rate, "frame rate, Hz");
  serve->add_option("--out", out, "live telemetry CSV path");

  auto * natural = app.add_subcommand("natural", "open-loop constant command run");
  natural->add_option("--scenario", scenario, "scenario file or shipped name")->required();
  natural->add_option("--command", command, "constant command as a fraction of full scale")->required();
  natural->add_option("--seed", seed, "noise seed override");
  natural->add_option("--out", out, "telemetry CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    return fail(exit_config, "usage", e.what());
  }

  try {
    if (*run) {
      auto cfg = tio::load_config(resolve_scenario(scenario));
      if (seed) {
        cfg.seed = *seed;
      }
      const auto log = engine::run_scenario(cfg);
      emit_log(log, out);
      const auto report = engine::detect_convergence(log, engine::target_from_log(log), cfg.band, cfg.hold);
      std::FILE * sink = out.empty() ? stderr : stdout;
      fmt::print(sink, "scenario={} seed={} frames={}\n{}\n", cfg.name, cfg.seed, log.size(), tio::format_report(report));
      return exit_ok;
    }
    if (*analyze) {
      const auto log = tio::read_log(log_path);
      engine::Target target = engine::target_from_log(log);
      if (!target_arg.empty()) {
        double constant = 0.0;
        try {
          std::size_t used = 0;
          constant = std::stod(target_arg, &used);
          if (used != target_arg.size()) {
            throw std::invalid_argument("schedule");
          }
          target = [constant](double) { return constant; };
        } catch (const std::logic_error &) {
          auto sched = tio::parse_schedule(target_arg, objective::Interpolation::step);
          target = [sched](double t) { return objective::source_position(t, sched); };
        }
      }
      const double h = hold_opt->count() > 0 ? hold : default_hold(log, hold);
      const auto report = engine::detect_convergence(log, target, band, h);
      fmt::print("frames={} hold={:.6g}\n{}\nerror_trend={}\n", log.size(), h, tio::format_report(report), error_trend(log, target));
      const double dt = log.size() > 1 ? log[1].t - log[0].t : 1e-3;
      print_spectrum(log, dt, f_min);
      return exit_ok;
    }
    if (*serve) {
      const auto cfg = tio::load_config(resolve_scenario(scenario));
      bridge::ServeOptions opts;
      opts.port = port;
      opts.rate_hz = rate;
      opts.log_path = out.empty() ? fs::path(cfg.name + "_live.csv") : fs::path(out);
      bridge::serve(cfg, opts);
      return exit_ok;
    }
    if (*natural) {
      auto cfg = tio::load_config(resolve_scenario(scenario));
      if (seed) {
        cfg.seed = *seed;
      }
      if (!std::isfinite(command) || command < 0.0 || command > 1.0) {
        throw ConfigError("--command: must lie in [0, 1]");
      }
      cfg.mode = engine::OpenLoop{units::normalized_to_command(command)};
      const auto log = engine::run_scenario(cfg);
      if (!out.empty()) {
        tio::write_log(out, log);
      }
      const double expected = 2.0 * cfg.dynamics.omega_f / (2.0 * std::numbers::pi);
      fmt::print(
        "scenario={} m_const={:.6g} pwm={:.6g} expected_peak_hz={:.6g}\n", cfg.name, units::normalized_to_command(command),
        units::command_to_pwm(units::normalized_to_command(command)), expected);
      print_spectrum(log, cfg.dt, f_min);
      return exit_ok;
    }
  } catch (const ConfigError & e) {
    return fail(exit_config, "config", e.what());
  } catch (const DivergenceError & e) {
    return fail(exit_divergence, "divergence", e.what());
  } catch (const IoError & e) {
    return fail(exit_io, "io", e.what());
  } catch (const std::exception & e) {
    return fail(1, "internal", e.what());
  }
  return exit_ok;
}

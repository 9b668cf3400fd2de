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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// FAIL. FLAPESC_REGEN_GOLDEN=1 rewrites the golden logs instead of diffing.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flapesc/controller.hpp"
#include "flapesc/dynamics.hpp"
#include "flapesc/engine.hpp"
#include "flapesc/telemetry_io.hpp"

using namespace flapesc;
namespace fs = std::filesystem;

namespace
{

struct Verdict
{
  bool pass{false};
  std::string detail;
};

int failures = 0;

void criterion(const std::string & name, const std::function<Verdict()> & check)
{
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception & e) {
    v = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fmt::print("{} {}: {} ({:.2f} s)\n", v.pass ? "PASS" : "FAIL", name, v.detail, secs);
  std::fflush(stdout);
  failures += v.pass ? 0 : 1;
}

engine::SimConfig scenario(const std::string & name)
{
  return tio::load_config(fs::path(FLAPESC_SCENARIO_DIR) / (name + ".ini"));
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

engine::TelemetryLog slice(const engine::TelemetryLog & log, double from, double to)
{
  engine::TelemetryLog out;
  for (const auto & f : log) {
    if (f.t >= from - 1e-9 && f.t < to - 1e-9) {
      out.push_back(f);
    }
  }
  return out;
}

// Window means of J may only rise by the dither-induced J ripple after the
// first window.
bool non_increasing(const std::vector<double> & means, double tolerance, std::string & worst)
{
  double max_rise = -INFINITY;
  for (std::size_t i = 2; i < means.size(); ++i) {
    max_rise = std::max(max_rise, means[i] - means[i - 1]);
  }
  worst = fmt::format("max_window_rise={:.4g} tol={:.4g}", max_rise, tolerance);
  return max_rise <= tolerance;
}

dynamics::FlapperState drive(dynamics::FlapperState s, double T, double dt, const dynamics::DynamicsParams & p)
{
  const auto n = static_cast<int>(std::lround(T / dt));
  auto input = [](double t) { return dynamics::ActuatorInput{0.0, 3.0 * std::cos(5.0 * t)}; };
  for (int i = 0; i < n; ++i) {
    s = dynamics::step(s, input, i * dt, dt, p, 1.0);
  }
  return s;
}

double distance(const dynamics::FlapperState & a, const dynamics::FlapperState & b)
{
  return std::abs(a.z - b.z) + std::abs(a.z_dot - b.z_dot) + std::abs(a.phi - b.phi) + std::abs(a.phi_dot - b.phi_dot);
}

Verdict free_fall()
{
  auto cfg = tio::load_config(fs::path(FLAPESC_TEST_DATA_DIR) / "free_fall.ini");
  engine::Simulation sim(cfg);
  while (!sim.done()) {
    sim.sense();
    sim.integrate();
  }
  const double t = sim.time();
  const double exact = cfg.initial_state.z + 0.5 * cfg.dynamics.g * t * t;
  const double rel = std::abs(sim.state().z - exact) / std::abs(sim.state().z);
  return {rel <= 1e-8, fmt::format("t={} z={:.12g} closed_form={:.12g} rel_err={:.3g} limit=1e-8", t, sim.state().z, exact, rel)};
}

Verdict integrator_order()
{
  dynamics::DynamicsParams p;
  const dynamics::FlapperState s0{0.0, 0.3, 0.0, 12.0};
  const double dt = 0.02;
  const auto a = drive(s0, 1.0, dt, p);
  const auto b = drive(s0, 1.0, dt / 2.0, p);
  const auto c = drive(s0, 1.0, dt / 4.0, p);
  const double ratio = distance(a, b) / distance(b, c);
  return {ratio >= 8.0 && ratio <= 32.0, fmt::format("ratio={:.4g} range=[8, 32]", ratio)};
}

// Composite Simpson over one dither period, written independently of the controller.
double simpson_mean_xi(double z_hat, double z_d, double a, double c, double omega)
{
  const double T = 2.0 * std::numbers::pi / omega;
  const int n = 4000;
  const double h = T / n;
  auto f = [&](double t) {
    const double e = z_hat + a * std::cos(omega * t) - z_d;
    return c * e * e * std::cos(omega * t);
  };
  double s = f(0.0) + f(T);
  for (int i = 1; i < n; ++i) {
    s += f(i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  return s * h / 3.0 / T;
}

Verdict demodulation_oracle()
{
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(-50.0, 50.0);
  std::uniform_real_distribution<double> amp(0.1, 2.0);
  std::uniform_real_distribution<double> gain(0.2, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    controller::EscParams p;
    p.hpf_enabled = false;
    p.k = 0.0;
    p.a = amp(rng);
    p.c = gain(rng);
    const double z_hat = pos(rng);
    const double z_d = pos(rng);
    const int samples = 100;
    const double dt = 2.0 * std::numbers::pi / p.omega / samples;
    auto s = controller::reset(p);
    double sum = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double e = z_hat + p.a * std::cos(p.omega * s.t) - z_d;
      sum += controller::esc_step(s, e * e, dt, p).xi;
    }
    const double mean = sum / samples;
    const double gradient = p.c * p.a / 2.0 * 2.0 * (z_hat - z_d);
    const double quad = simpson_mean_xi(z_hat, z_d, p.a, p.c, p.omega);
    const double scale = std::max(1.0, std::abs(gradient));
    worst = std::max({worst, std::abs(mean - gradient) / scale, std::abs(quad - gradient) / scale});
  }
  return {worst <= 1e-9, fmt::format("cases=10 worst_err={:.3g} limit=1e-9", worst)};
}

Verdict hpf_dc_rejection()
{
  controller::EscParams p;
  p.hpf_enabled = true;
  p.h = 0.2;
  p.k = 0.0;
  auto s = controller::reset(p);
  const double J0 = 250.0;
  const double dt = 1e-3;
  double J_hp = 0.0;
  for (int i = 0; i < 25000; ++i) {
    J_hp = controller::esc_step(s, J0, dt, p).J_hp;
  }
  const double frac = std::abs(J_hp) / J0;
  return {frac <= 0.007, fmt::format("residual={:.4g}% limit=0.7%", 100.0 * frac)};
}

Verdict scenario_n()
{
  const auto cfg = scenario("scenario_n");
  const auto log = engine::run_scenario(cfg);
  const auto J = engine::column_J(log);
  const auto peak = engine::spectrum_analysis(J, cfg.dt, 1.0);
  const double expected = 2.0 * cfg.dynamics.omega_f / (2.0 * std::numbers::pi);
  const bool pass = std::abs(peak.frequency - expected) <= peak.bin_width && peak.peak_to_floor >= 5.0;
  return {pass, fmt::format(
                  "peak={:.5g} Hz expected={:.5g} Hz bin={:.4g} Hz peak_to_floor={:.4g}", peak.frequency, expected,
                  peak.bin_width, peak.peak_to_floor)};
}

struct ClosedLoopResult
{
  bool pass{false};
  std::string detail;
  double terminal_error{0.0};
};

// Smallest J change the sensor can report: one ADC count, zero for the exact objective.
double resolution(const engine::SimConfig & cfg)
{
  if (const auto * field = std::get_if<objective::LightField>(&cfg.objective)) {
    const auto & s = field->sensor;
    return s.adc_bits > 0 ? s.r_max / (std::ldexp(1.0, s.adc_bits) - 1.0) : 0.0;
  }
  return 0.0;
}

ClosedLoopResult closed_loop(const engine::SimConfig & cfg, const engine::Ripple & ripple)
{
  const auto log = engine::run_scenario(cfg);
  const double band = engine::acceptance_band(ripple.z);
  const auto r = engine::detect_convergence(log, engine::target_from_log(log), band, cfg.hold);
  std::string descent;
  const bool down = non_increasing(engine::window_means_J(log, 5.0), std::max(ripple.J, resolution(cfg)), descent);
  const bool pass = r.converged && r.terminal_mean_abs_error <= band && down;
  return {pass,
          fmt::format(
            "converged={} settle={} terminal_err={:.4g} mm band={:.4g} mm {}", r.converged,
            r.settle_time ? fmt::format("{:.4g}s", *r.settle_time) : "none", r.terminal_mean_abs_error, band, descent),
          r.terminal_mean_abs_error};
}

Verdict scenario_a()
{
  const auto cfg = scenario("scenario_a");
  const auto r = closed_loop(cfg, engine::dither_ripple(cfg));
  return {r.pass, r.detail};
}

Verdict scenario_b()
{
  auto cfg = scenario("scenario_b");
  const auto ripple = engine::dither_ripple(cfg);
  int passed = 0;
  double worst = 0.0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.seed = seed;
    const auto r = closed_loop(cfg, ripple);
    passed += r.pass ? 1 : 0;
    worst = std::max(worst, r.terminal_error);
    if (!r.pass && detail.empty()) {
      detail = fmt::format(" first_failure=seed{} [{}]", seed, r.detail);
    }
  }
  return {passed == 10, fmt::format(
                          "seeds_passing={}/10 worst_terminal_err={:.4g} mm band={:.4g} mm{}", passed, worst,
                          engine::acceptance_band(ripple.z), detail)};
}

void scenario_b_default_noise()
{
  auto cfg = scenario("scenario_b");
  auto & sensor = std::get<objective::LightField>(cfg.objective).sensor;
  sensor.noise_sigma = objective::default_noise_sigma(sensor.r_floor, sensor.r_max);
  const auto r = closed_loop(cfg, engine::dither_ripple(cfg));
  fmt::print("INFO scenario_b at default noise sigma={:.4g} counts: {}\n", sensor.noise_sigma, r.detail);
}

Verdict scenario_c()
{
  const auto cfg = scenario("scenario_c");
  const auto log = engine::run_scenario(cfg);
  const double band = engine::acceptance_band(engine::dither_ripple(cfg).z);
  const auto target = engine::target_from_log(log);
  bool pass = true;
  std::string detail = fmt::format("band={:.4g} mm", band);
  const auto & pts = std::get<objective::LightField>(cfg.objective).schedule.points;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const double from = pts[k].first;
    const double to = k + 1 < pts.size() ? pts[k + 1].first : cfg.duration + cfg.dt;
    const auto r = engine::detect_convergence(slice(log, from, to), target, band, cfg.hold);
    const double settle = r.settle_time ? *r.settle_time - from : INFINITY;
    const bool ok = r.converged && settle <= 30.0 && r.terminal_mean_abs_error <= band;
    pass = pass && ok;
    detail += fmt::format(
      " step@{}s->{}: settle={:.4g}s terminal_err={:.4g} mm", from, pts[k].second, settle, r.terminal_mean_abs_error);
  }

  // Same moves issued as live commands against a frozen source.
  auto live = cfg;
  std::get<objective::LightField>(live.objective).schedule.points = {pts.front()};
  std::vector<engine::Command> moves;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    moves.push_back({pts[k].first, engine::CommandKind::set_source, pts[k].second});
  }
  const bool same = tio::format_log(engine::run_scenario(live, moves)) == tio::format_log(log);
  detail += fmt::format(" live_replay={}", same ? "identical" : "differs");
  return {pass && same, detail};
}

engine::SimConfig short_run(engine::SimConfig cfg)
{
  cfg.duration = 2.0;
  cfg.hold = 0.5;
  return cfg;
}

Verdict determinism_and_goldens()
{
  int identical = 0;
  int runs = 0;
  for (const char * name : {"scenario_a", "scenario_b", "scenario_c", "scenario_n"}) {
    auto cfg = scenario(name);
    for (std::uint64_t seed : {1, 2}) {
      cfg.seed = seed;
      ++runs;
      identical += tio::format_log(engine::run_scenario(cfg)) == tio::format_log(engine::run_scenario(cfg)) ? 1 : 0;
    }
  }

  const fs::path dir(FLAPESC_GOLDEN_DIR);
  const bool regen = std::getenv("FLAPESC_REGEN_GOLDEN") != nullptr;
  std::vector<std::pair<std::string, engine::SimConfig>> goldens;
  for (const char * name : {"scenario_a", "scenario_b", "scenario_c", "scenario_n"}) {
    goldens.emplace_back(std::string(name) + "_2s.csv", short_run(scenario(name)));
  }
  goldens.emplace_back("free_fall.csv", tio::load_config(fs::path(FLAPESC_TEST_DATA_DIR) / "free_fall.ini"));
  int matched = 0;
  std::string mismatched;
  for (const auto & [file, cfg] : goldens) {
    const auto text = tio::format_log(engine::run_scenario(cfg));
    if (regen) {
      tio::write_log(dir / file, engine::run_scenario(cfg));
    }
    if (slurp(dir / file) == text) {
      ++matched;
    } else {
      mismatched += " " + file;
    }
  }
  const bool pass = identical == runs && matched == static_cast<int>(goldens.size());
  return {pass, fmt::format(
                  "identical_reruns={}/{} goldens_matched={}/{}{}{}", identical, runs, matched, goldens.size(),
                  mismatched.empty() ? "" : " mismatched:" + mismatched, regen ? " (regenerated)" : "")};
}

}  // namespace

int main()
{
  criterion("free_fall_analytic", free_fall);
  criterion("integrator_order", integrator_order);
  criterion("demodulation_oracle", demodulation_oracle);
  criterion("hpf_dc_rejection", hpf_dc_rejection);
  criterion("scenario_n_natural_perturbation", scenario_n);
  criterion("scenario_a_known_objective", scenario_a);
  criterion("scenario_b_fixed_light_seeds_1_10", scenario_b);
  scenario_b_default_noise();
  criterion("scenario_c_moving_source", scenario_c);
  criterion("determinism_and_golden_logs", determinism_and_goldens);
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

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

#include "flapesc/engine.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "flapesc/errors.hpp"
#include "flapesc/units.hpp"

namespace flapesc::engine
{

void validate(const SimConfig & c)
{
  auto require = [](bool ok, const char * field, const char * rule) {
    if (!ok) {
      throw ConfigError(fmt::format("{}: {}", field, rule));
    }
  };
  require(std::isfinite(c.dt_max) && c.dt_max > 0.0, "sim.dt_max", "must be > 0");
  require(std::isfinite(c.dt) && c.dt > 0.0 && c.dt <= c.dt_max, "sim.dt", "must lie in (0, dt_max]");
  require(std::isfinite(c.duration) && c.duration > 0.0, "sim.duration", "must be > 0");
  const double n = std::round(c.duration / c.dt);
  require(std::abs(n * c.dt - c.duration) <= 1e-9 * c.duration, "sim.duration", "must be a whole number of dt steps");
  require(c.control_decimation >= 1, "sim.control_decimation", "must be >= 1");
  require(std::isfinite(c.z_ref), "sim.z_ref", "must be finite");
  require(std::isfinite(c.band) && c.band > 0.0, "sim.band", "must be > 0");
  require(std::isfinite(c.hold) && c.hold > 0.0 && c.hold < c.duration, "sim.hold", "must lie in (0, duration)");
  if (const auto * ol = std::get_if<OpenLoop>(&c.mode)) {
    require(std::isfinite(ol->m_const), "sim.m_const", "must be finite");
  }
  dynamics::validate(c.dynamics);
  controller::validate(c.esc);
  objective::validate(c.objective);
  try {
    dynamics::check_finite(c.initial_state, "initial state");
  } catch (const DivergenceError & e) {
    throw ConfigError(fmt::format("sim.{}: must be finite", e.field()));
  }
}

std::size_t step_count(const SimConfig & c) { return static_cast<std::size_t>(std::llround(c.duration / c.dt)); }

void CommandQueue::push(Command c)
{
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(c);
  }
  cv_.notify_one();
}

std::vector<Command> CommandQueue::drain()
{
  std::lock_guard lock(mutex_);
  std::vector<Command> out(queue_.begin(), queue_.end());
  queue_.clear();
  return out;
}

std::vector<Command> CommandQueue::wait_drain(double timeout_s)
{
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), [this] { return !queue_.empty(); });
  std::vector<Command> out(queue_.begin(), queue_.end());
  queue_.clear();
  return out;
}

Simulation::Simulation(SimConfig config)
: config_(std::move(config)), steps_(0), noise_(config_.seed)
{
  validate(config_);
  steps_ = step_count(config_);
  state_ = config_.initial_state;
  esc_ = controller::reset(config_.esc);
}

bool Simulation::has_light_field() const { return std::holds_alternative<objective::LightField>(config_.objective); }

double Simulation::source_now(double t) const
{
  if (source_override_) {
    return *source_override_;
  }
  return objective::source_position(t, std::get<objective::LightField>(config_.objective).schedule);
}

void Simulation::apply(const Command & c)
{
  switch (c.kind) {
    case CommandKind::set_source:
      if (!has_light_field()) {
        throw ConfigError("set_source needs a light-field objective");
      }
      if (!std::isfinite(c.z)) {
        throw ConfigError("set_source: z must be finite");
      }
      source_override_ = c.z;
      break;
    case CommandKind::pause:
    case CommandKind::resume:
      break;
    case CommandKind::reset: {
      SimConfig cfg = std::move(config_);
      *this = Simulation(std::move(cfg));
      break;
    }
  }
}

const TelemetryFrame & Simulation::sense()
{
  const double t = time();
  const double alt = units::altitude_mm(state_.z, config_.z_ref);
  double J = 0.0;
  double z_src = 0.0;
  if (const auto * q = std::get_if<objective::Quadratic>(&config_.objective)) {
    z_src = q->z_d;
    J = objective::quadratic_eval(alt, z_src);
  } else {
    z_src = source_now(t);
    J = objective::reading_at(alt, z_src, std::get<objective::LightField>(config_.objective).sensor, noise_);
  }

  if (const auto * ol = std::get_if<OpenLoop>(&config_.mode)) {
    held_ = {J, 0.0, ol->m_const};
    esc_.m_hat = ol->m_const;
  } else if (index_ % static_cast<std::size_t>(config_.control_decimation) == 0) {
    try {
      held_ = controller::esc_step(esc_, J, config_.dt * config_.control_decimation, config_.esc);
    } catch (const DivergenceError & e) {
      throw DivergenceError(e.field(), e.what(), index_ == 0 ? std::nullopt : std::optional(index_ - 1));
    }
  }

  frame_ = {t, alt, -1000.0 * state_.z_dot, state_.phi_dot, J, held_.J_hp, held_.xi, esc_.m_hat, held_.m, z_src};
  sensed_ = true;
  return frame_;
}

void Simulation::integrate()
{
  if (done()) {
    throw std::logic_error("Simulation::integrate past the final step");
  }
  if (!sensed_) {
    sense();
  }
  const double m = frame_.m;
  const auto & dyn = config_.dynamics;
  auto input = [m, &dyn](double s) { return dynamics::ActuatorInput{0.0, dynamics::carrier_torque(m, s, dyn)}; };
  try {
    state_ = dynamics::step(state_, input, time(), config_.dt, dyn, config_.dt_max);
  } catch (const DivergenceError & e) {
    throw DivergenceError(
      e.field(), fmt::format("simulation diverged at t = {}: {} (last valid frame {})", time(), e.what(), index_),
      index_);
  }
  ++index_;
  sensed_ = false;
}

TelemetryLog run_scenario(const SimConfig & config, std::span<const Command> commands)
{
  std::vector<Command> pending(commands.begin(), commands.end());
  std::stable_sort(pending.begin(), pending.end(), [](const Command & a, const Command & b) { return a.t < b.t; });
  for (const auto & c : pending) {
    if (c.kind == CommandKind::reset) {
      throw ConfigError("reset is only available in live sessions");
    }
  }

  Simulation sim(config);
  TelemetryLog log;
  log.reserve(sim.steps() + 1);
  std::size_t next = 0;
  while (true) {
    const double t = sim.time();
    while (next < pending.size() && pending[next].t <= t) {
      sim.apply(pending[next++]);
    }
    log.push_back(sim.sense());
    if (sim.done()) {
      break;
    }
    sim.integrate();
  }
  return log;
}

ConvergenceReport detect_convergence(const TelemetryLog & log, const Target & target, double band, double hold)
{
  ConvergenceReport r;
  r.terminal_band = band;
  if (log.empty()) {
    return r;
  }
  const double t0 = log.front().t;
  const double t_end = log.back().t;

  std::size_t start = log.size();
  for (std::size_t i = log.size(); i-- > 0;) {
    if (std::abs(log[i].z - target(log[i].t)) > band) {
      break;
    }
    start = i;
  }
  if (start < log.size() && t_end - log[start].t >= hold) {
    r.converged = true;
    r.settle_time = log[start].t;
  }

  const double tail_from = t_end - 0.2 * (t_end - t0);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto & f : log) {
    if (f.t >= tail_from) {
      sum += std::abs(f.z - target(f.t));
      ++n;
    }
  }
  r.terminal_mean_abs_error = n > 0 ? sum / static_cast<double>(n) : 0.0;
  return r;
}

Target target_from_log(const TelemetryLog & log)
{
  std::vector<double> t(log.size());
  std::vector<double> z(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    t[i] = log[i].t;
    z[i] = log[i].z_src;
  }
  return [t = std::move(t), z = std::move(z)](double when) {
    if (t.empty()) {
      return 0.0;
    }
    auto it = std::lower_bound(t.begin(), t.end(), when);
    if (it == t.end()) {
      return z.back();
    }
    if (it != t.begin() && (when - *(it - 1)) < (*it - when)) {
      --it;
    }
    return z[static_cast<std::size_t>(it - t.begin())];
  };
}

SpectrumPeak spectrum_analysis(std::span<const double> signal, double dt, double f_min)
{
  if (signal.size() < min_spectrum_samples) {
    throw ConfigError(fmt::format(
      "spectrum: series has {} samples, need at least {}", signal.size(), min_spectrum_samples));
  }
  std::size_t n = min_spectrum_samples;
  while (n * 2 <= signal.size()) {
    n *= 2;
  }
  const auto block = signal.subspan(signal.size() - n);
  double mean = 0.0;
  for (double v : block) {
    mean += v;
  }
  mean /= static_cast<double>(n);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)));
    x[i] = (block[i] - mean) * w;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);

  const double df = 1.0 / (static_cast<double>(n) * dt);
  std::vector<double> mags;
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    if (static_cast<double>(k) * df < f_min) {
      continue;
    }
    const double mag = std::abs(spec[k]);
    mags.push_back(mag);
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  if (mags.empty()) {
    throw ConfigError("spectrum: f_min lies above the Nyquist frequency");
  }
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  const double floor = *mid;

  SpectrumPeak p;
  p.frequency = static_cast<double>(best) * df;
  p.bin_width = df;
  p.peak_to_floor = floor > 0.0 ? best_mag / floor : std::numeric_limits<double>::infinity();
  return p;
}

double spectrum_peak(std::span<const double> signal, double dt, double f_min)
{
  return spectrum_analysis(signal, dt, f_min).frequency;
}

Ripple dither_ripple(const SimConfig & config, double window_s)
{
  SimConfig quiet = config;
  if (auto * lf = std::get_if<objective::LightField>(&quiet.objective)) {
    lf->sensor.noise_sigma = 0.0;
    lf->schedule.points = {{0.0, objective::source_position(0.0, lf->schedule)}};
  }
  const TelemetryLog log = run_scenario(quiet);
  const double from = log.back().t - window_s;
  const double inf = std::numeric_limits<double>::infinity();
  double z_lo = inf;
  double z_hi = -inf;
  double j_lo = inf;
  double j_hi = -inf;
  for (const auto & f : log) {
    if (f.t >= from) {
      z_lo = std::min(z_lo, f.z);
      z_hi = std::max(z_hi, f.z);
      j_lo = std::min(j_lo, f.J);
      j_hi = std::max(j_hi, f.J);
    }
  }
  return {0.5 * (z_hi - z_lo), 0.5 * (j_hi - j_lo)};
}

std::vector<double> window_means_J(const TelemetryLog & log, double window_s)
{
  std::vector<double> out;
  if (log.empty()) {
    return out;
  }
  const double t0 = log.front().t;
  std::size_t current = 0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto & f : log) {
    const auto w = static_cast<std::size_t>(std::floor((f.t - t0) / window_s + 1e-9));
    if (w != current) {
      out.push_back(sum / static_cast<double>(n));
      current = w;
      sum = 0.0;
      n = 0;
    }
    sum += f.J;
    ++n;
  }
  // The trailing window is partial unless it ends exactly on the last frame.
  return out;
}

std::vector<double> column_J(const TelemetryLog & log)
{
  std::vector<double> out;
  out.reserve(log.size());
  for (const auto & f : log) {
    out.push_back(f.J);
  }
  return out;
}

}  // namespace flapesc::engine

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

#include "flapesc/controller.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flapesc/errors.hpp"

namespace flapesc::controller
{

PeriodAverage::PeriodAverage(double window_s, double dt)
: window_s_(window_s), dt_(dt)
{
  samples_ = window_s / dt;
  whole_ = static_cast<std::size_t>(samples_);
  frac_ = samples_ - static_cast<double>(whole_);
  ring_.assign(whole_ + 1, 0.0);
}

bool PeriodAverage::configured_for(double window_s, double dt) const
{
  return !ring_.empty() && window_s_ == window_s && dt_ == dt;
}

double PeriodAverage::push(double x)
{
  const std::size_t n = ring_.size();
  ring_[head_] = x;
  ++seen_;
  double avg = 0.0;
  if (seen_ > whole_) {
    // Newest whole_ samples at full weight plus the fractional tail sample.
    double sum = 0.0;
    for (std::size_t q = 0; q < whole_; ++q) {
      sum += ring_[(head_ + n - q) % n];
    }
    sum += frac_ * ring_[(head_ + n - whole_) % n];
    avg = sum / samples_;
  }
  head_ = (head_ + 1) % n;
  return avg;
}

void validate(const EscParams & p)
{
  auto require = [](bool ok, const char * field, const char * rule) {
    if (!ok) {
      throw ConfigError(fmt::format("esc.{}: {}", field, rule));
    }
  };
  require(std::isfinite(p.omega) && p.omega > 0.0, "omega", "must be > 0");
  require(std::isfinite(p.a) && p.a >= 0.0, "a", "must be >= 0");
  require(std::isfinite(p.k) && p.k >= 0.0, "k", "must be >= 0");
  require(std::isfinite(p.c) && p.c > 0.0, "c", "must be > 0");
  require(!p.hpf_enabled || (std::isfinite(p.h) && p.h > 0.0), "h", "must be > 0 when hpf_enabled");
  require(std::isfinite(p.m_min) && std::isfinite(p.m_max) && p.m_min < p.m_max, "m_min", "must be < m_max");
  require(p.sign == 1.0 || p.sign == -1.0, "sign", "must be +1 or -1");
  require(std::isfinite(p.lead) && p.lead >= 0.0, "lead", "must be >= 0");
  require(std::isfinite(p.lead_periods) && p.lead_periods > 0.0, "lead_periods", "must be > 0");
  require(!p.m_init || std::isfinite(*p.m_init), "m_init", "must be finite");
}

double hpf_update(double & eta, double J, double h, double dt)
{
  eta += (J - eta) * (1.0 - std::exp(-h * dt));
  return J - eta;
}

double washout(EscState & state, double J, const EscParams & p, double dt)
{
  return p.hpf_enabled ? hpf_update(state.eta, J, p.h, dt) : J;
}

EscOutput esc_step(EscState & s, double J_meas, double dt, const EscParams & p)
{
  if (!std::isfinite(J_meas)) {
    throw DivergenceError("J", fmt::format("measurement fault: non-finite J at t = {}", s.t));
  }
  const double cw = std::cos(p.omega * s.t);
  EscOutput out;
  out.J_hp = washout(s, J_meas, p, dt);
  out.xi = p.c * out.J_hp * cw;
  s.m_hat = std::clamp(s.m_hat + p.sign * (-p.k) * out.xi * dt, p.m_min, p.m_max);

  double lead_term = 0.0;
  if (p.lead > 0.0) {
    const double window = p.lead_periods * 2.0 * std::numbers::pi / p.omega;
    if (!s.lead_avg.configured_for(window, dt)) {
      s.lead_avg = PeriodAverage(window, dt);
    }
    lead_term = p.sign * (-p.k) * p.lead * s.lead_avg.push(out.xi);
  }
  out.m = std::clamp(s.m_hat + lead_term + p.a * cw, p.m_min, p.m_max);
  s.t += dt;
  return out;
}

EscState reset(const EscParams & p)
{
  EscState s;
  const double mid = 0.5 * (p.m_min + p.m_max);
  const double wanted = p.m_init.value_or(mid);
  s.m_hat = std::clamp(wanted, p.m_min, p.m_max);
  if (s.m_hat != wanted) {
    spdlog::warn("esc.m_init {} outside [{}, {}], clamped to {}", wanted, p.m_min, p.m_max, s.m_hat);
  }
  return s;
}

}  // namespace flapesc::controller

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

#ifndef FLAPESC_CONTROLLER_HPP_
#define FLAPESC_CONTROLLER_HPP_

#include <cstddef>
#include <optional>
#include <vector>

namespace flapesc::controller
{

struct EscParams
{
  double omega{100.0};  // dither frequency, rad/s
  double k{0.003};      // integrator gain
  double a{0.7};        // dither amplitude, command units
  double c{1.095};      // demodulation gain
  double h{0.2};        // washout gain, 1/s
  bool hpf_enabled{false};
  double m_min{0.0};
  double m_max{100.0};
  double sign{1.0};
  std::optional<double> m_init;  // unset means midpoint of the bounds

  // Proportional path on the demodulated signal, in seconds of integrator
  // action. The plain integrator loop around a force-driven body has no
  // damping term, so it rings; lead adds it back. 0 disables the path.
  double lead{0.0};
  // Averaging window for the proportional path, in dither periods. Two
  // periods also cancel the carrier when omega_f = omega / 2.
  double lead_periods{2.0};
};

// Moving average over a fractional number of samples. Reads 0 until full.
class PeriodAverage
{
public:
  PeriodAverage() = default;
  PeriodAverage(double window_s, double dt);

  double push(double x);
  [[nodiscard]] bool configured_for(double window_s, double dt) const;

private:
  std::vector<double> ring_;
  std::size_t head_{0};
  std::size_t seen_{0};
  std::size_t whole_{0};
  double frac_{0.0};
  double samples_{0.0};
  double window_s_{0.0};
  double dt_{0.0};
};

struct EscState
{
  double eta{0.0};    // washout state
  double m_hat{0.0};  // adapted command
  double t{0.0};      // controller clock
  PeriodAverage lead_avg;
};

struct EscOutput
{
  double J_hp{0.0};
  double xi{0.0};
  double m{0.0};
};

void validate(const EscParams & params);

// Exact discretization of eta' = h (J - eta). Returns J - eta'.
double hpf_update(double & eta, double J, double h, double dt);

// Washout honouring hpf_enabled; bypass leaves eta untouched.
double washout(EscState & state, double J, const EscParams & params, double dt);

EscOutput esc_step(EscState & state, double J_meas, double dt, const EscParams & params);

[[nodiscard]] EscState reset(const EscParams & params);

}  // namespace flapesc::controller

#endif  // FLAPESC_CONTROLLER_HPP_

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

#ifndef FLAPESC_DYNAMICS_HPP_
#define FLAPESC_DYNAMICS_HPP_

#include <cmath>

#include "flapesc/errors.hpp"

namespace flapesc::dynamics
{

struct FlapperState
{
  double z{0.0};        // m, positive down
  double z_dot{0.0};    // m/s
  double phi{0.0};      // rad
  double phi_dot{0.0};  // rad/s

  bool operator==(const FlapperState &) const = default;
};

// Same layout, read as (z_dot, z_ddot, phi_dot, phi_ddot).
using FlapperStateDerivative = FlapperState;

struct DynamicsParams
{
  double k_d1{0.2};     // vertical drag, 1/m
  double k_L{0.1};      // lift, m/rad^2
  double k_d2{0.05};    // rotational drag
  double k_d3{0.01};    // coupling drag
  double g{9.81};       // m/s^2
  double kappa_m{18.430448731466452};  // rad/s^2 per command unit
  double omega_f{50.0};  // flapping carrier, rad/s
};

struct ActuatorInput
{
  double u_z{0.0};    // m/s^2
  double u_phi{0.0};  // rad/s^2
};

void validate(const DynamicsParams & params);

[[nodiscard]] FlapperStateDerivative derivatives(
  const FlapperState & state, const ActuatorInput & input, const DynamicsParams & params);

[[nodiscard]] double hover_equilibrium(const DynamicsParams & params);

// Wing torque for a slowly varying command m riding on the flapping carrier.
[[nodiscard]] inline double carrier_torque(double m, double t, const DynamicsParams & params)
{
  return params.kappa_m * m * std::cos(params.omega_f * t);
}

// Gain that puts the carrier-averaged lift exactly at gravity for command m_hover.
// For u = kappa m cos(wt) the rate amplitude is kappa m / w and the mean of
// k_L phi_dot^2 is k_L (kappa m / w)^2 / 2.
[[nodiscard]] double calibrate_kappa_m(const DynamicsParams & params, double m_hover);

// Throws DivergenceError naming the first non-finite field.
void check_finite(const FlapperState & state, const char * what);

inline constexpr double default_dt_max = 1e-3;

// One classical RK4 step. input_fn is sampled at t, t + dt/2 and t + dt.
template <class InputFn>
[[nodiscard]] FlapperState step(
  const FlapperState & s, InputFn && input_fn, double t, double dt, const DynamicsParams & params,
  double dt_max = default_dt_max)
{
  if (!(dt > 0.0) || dt > dt_max) {
    throw ConfigError("dynamics step: dt must lie in (0, dt_max]");
  }
  auto axpy = [](const FlapperState & a, double h, const FlapperState & d) {
    return FlapperState{a.z + h * d.z, a.z_dot + h * d.z_dot, a.phi + h * d.phi, a.phi_dot + h * d.phi_dot};
  };
  const double half = 0.5 * dt;
  const FlapperState k1 = derivatives(s, input_fn(t), params);
  const FlapperState k2 = derivatives(axpy(s, half, k1), input_fn(t + half), params);
  const FlapperState k3 = derivatives(axpy(s, half, k2), input_fn(t + half), params);
  const FlapperState k4 = derivatives(axpy(s, dt, k3), input_fn(t + dt), params);
  const double w = dt / 6.0;
  FlapperState out{
    s.z + w * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
    s.z_dot + w * (k1.z_dot + 2.0 * k2.z_dot + 2.0 * k3.z_dot + k4.z_dot),
    s.phi + w * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi),
    s.phi_dot + w * (k1.phi_dot + 2.0 * k2.phi_dot + 2.0 * k3.phi_dot + k4.phi_dot)};
  check_finite(out, "integrated state");
  return out;
}

}  // namespace flapesc::dynamics

#endif  // FLAPESC_DYNAMICS_HPP_

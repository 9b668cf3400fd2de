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

#include "flapesc/dynamics.hpp"

#include <fmt/format.h>

namespace flapesc
{

DivergenceError::DivergenceError(
  std::string field, std::string what, std::optional<std::size_t> last_valid_frame)
: std::runtime_error(std::move(what)), field_(std::move(field)), last_valid_frame_(last_valid_frame)
{
}

}  // namespace flapesc

namespace flapesc::dynamics
{

void validate(const DynamicsParams & p)
{
  auto require = [](bool ok, const char * field, const char * rule) {
    if (!ok) {
      throw ConfigError(fmt::format("dynamics.{}: {}", field, rule));
    }
  };
  require(std::isfinite(p.k_L) && p.k_L > 0.0, "k_L", "must be > 0");
  require(std::isfinite(p.g) && p.g > 0.0, "g", "must be > 0");
  require(std::isfinite(p.kappa_m) && p.kappa_m > 0.0, "kappa_m", "must be > 0");
  require(std::isfinite(p.omega_f) && p.omega_f > 0.0, "omega_f", "must be > 0");
  require(std::isfinite(p.k_d1) && p.k_d1 >= 0.0, "k_d1", "must be >= 0");
  require(std::isfinite(p.k_d2) && p.k_d2 >= 0.0, "k_d2", "must be >= 0");
  require(std::isfinite(p.k_d3) && p.k_d3 >= 0.0, "k_d3", "must be >= 0");
}

void check_finite(const FlapperState & s, const char * what)
{
  const char * bad = nullptr;
  if (!std::isfinite(s.z)) {
    bad = "z";
  } else if (!std::isfinite(s.z_dot)) {
    bad = "z_dot";
  } else if (!std::isfinite(s.phi)) {
    bad = "phi";
  } else if (!std::isfinite(s.phi_dot)) {
    bad = "phi_dot";
  }
  if (bad != nullptr) {
    throw DivergenceError(bad, fmt::format("{}: non-finite {}", what, bad));
  }
}

FlapperStateDerivative derivatives(
  const FlapperState & s, const ActuatorInput & in, const DynamicsParams & p)
{
  check_finite(s, "derivatives state");
  if (!std::isfinite(in.u_z)) {
    throw DivergenceError("u_z", "derivatives input: non-finite u_z");
  }
  if (!std::isfinite(in.u_phi)) {
    throw DivergenceError("u_phi", "derivatives input: non-finite u_phi");
  }
  const double abs_rate = std::abs(s.phi_dot);
  const double z_ddot = -p.k_d1 * abs_rate * s.z_dot + p.g - p.k_L * s.phi_dot * s.phi_dot + in.u_z;
  const double phi_ddot = -p.k_d3 * s.z_dot * s.phi_dot - p.k_d2 * abs_rate * s.phi_dot + in.u_phi;
  return {s.z_dot, z_ddot, s.phi_dot, phi_ddot};
}

double hover_equilibrium(const DynamicsParams & p)
{
  if (!(p.k_L > 0.0)) {
    throw ConfigError("dynamics.k_L: must be > 0 for a hover equilibrium");
  }
  return std::sqrt(p.g / p.k_L);
}

double calibrate_kappa_m(const DynamicsParams & p, double m_hover)
{
  if (!(m_hover > 0.0)) {
    throw ConfigError("hover command must be > 0");
  }
  return std::sqrt(2.0) * hover_equilibrium(p) * p.omega_f / m_hover;
}

}  // namespace flapesc::dynamics

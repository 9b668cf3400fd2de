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

#include <doctest.h>

#include <cmath>
#include <random>

#include "flapesc/dynamics.hpp"
#include "flapesc/errors.hpp"

using namespace flapesc;
using namespace flapesc::dynamics;

namespace
{

FlapperState integrate(FlapperState s, double T, double dt, const DynamicsParams & p)
{
  const auto n = static_cast<int>(std::lround(T / dt));
  auto input = [](double t) { return ActuatorInput{0.0, 3.0 * std::cos(5.0 * t)}; };
  for (int i = 0; i < n; ++i) {
    s = step(s, input, i * dt, dt, p, 1.0);
  }
  return s;
}

double distance(const FlapperState & a, const FlapperState & b)
{
  return std::abs(a.z - b.z) + std::abs(a.z_dot - b.z_dot) + std::abs(a.phi - b.phi) + std::abs(a.phi_dot - b.phi_dot);
}

}  // namespace

TEST_CASE("derivatives match the equations of motion")
{
  DynamicsParams p;
  SUBCASE("pure gravity at rest")
  {
    const auto d = derivatives({0, 0, 0, 0}, {0, 0}, p);
    CHECK(d.z == 0.0);
    CHECK(d.z_dot == doctest::Approx(9.81));
    CHECK(d.phi == 0.0);
    CHECK(d.phi_dot == 0.0);
  }
  SUBCASE("lift cancels gravity at the hover rate")
  {
    const auto d = derivatives({0, 0, 0, std::sqrt(p.g / p.k_L)}, {0, 0}, p);
    CHECK(std::abs(d.z_dot) < 1e-12);
  }
  SUBCASE("hand substitution")
  {
    const auto d = derivatives({0, 1, 0, 2}, {0, 0}, p);
    CHECK(d.z_dot == doctest::Approx(9.01).epsilon(1e-14));
    // -k_d3 z_dot phi_dot - k_d2 |phi_dot| phi_dot
    CHECK(d.phi_dot == doctest::Approx(-0.02 - 0.2).epsilon(1e-14));
  }
  SUBCASE("inputs add directly")
  {
    const auto d = derivatives({0, 0, 0, 0}, {1.5, -2.0}, p);
    CHECK(d.z_dot == doctest::Approx(11.31));
    CHECK(d.phi_dot == doctest::Approx(-2.0));
  }
}

TEST_CASE("derivatives reject non-finite values and name the field")
{
  DynamicsParams p;
  try {
    (void)derivatives({0, NAN, 0, 0}, {0, 0}, p);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError & e) {
    CHECK(e.field() == "z_dot");
  }
  try {
    (void)derivatives({0, 0, 0, 0}, {0, INFINITY}, p);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError & e) {
    CHECK(e.field() == "u_phi");
  }
}

TEST_CASE("hover equilibrium")
{
  DynamicsParams p;
  CHECK(hover_equilibrium(p) == doctest::Approx(9.90454441153150668).epsilon(1e-15));
  p.k_L = 9.81;
  CHECK(hover_equilibrium(p) == 1.0);
  p.k_L = 0.0;
  CHECK_THROWS_AS((void)hover_equilibrium(p), ConfigError);
}

TEST_CASE("kappa_m calibration puts mean lift at gravity")
{
  DynamicsParams p;
  p.omega_f = 50.0;
  CHECK(calibrate_kappa_m(p, 38.0) == doctest::Approx(18.4304487314664505).epsilon(1e-14));
  p.omega_f = 60.0;
  CHECK(calibrate_kappa_m(p, 38.0) == doctest::Approx(22.1165384777597407).epsilon(1e-14));

  // Drag-free wing started at rest: phi_dot = (kappa m / w) sin(w t). Average
  // k_L phi_dot^2 over whole carrier periods of the integrated trajectory.
  p.k_d2 = 0.0;
  p.k_d3 = 0.0;
  p.kappa_m = calibrate_kappa_m(p, 38.0);
  const double dt = 1e-4;
  const int per_period = static_cast<int>(std::lround(2.0 * M_PI / p.omega_f / dt));
  FlapperState s;
  double sum = 0.0;
  const int n = 10 * per_period;
  for (int i = 0; i < n; ++i) {
    sum += p.k_L * s.phi_dot * s.phi_dot;
    s = step(s, [&](double t) { return ActuatorInput{0.0, carrier_torque(38.0, t, p)}; }, i * dt, dt, p);
    s.z = 0.0;
    s.z_dot = 0.0;
  }
  CHECK(sum / n == doctest::Approx(p.g).epsilon(2e-3));
}

TEST_CASE("free fall matches the closed form")
{
  DynamicsParams p;
  FlapperState s{-0.4, 0.0, 0.0, 0.0};
  const double dt = 1e-3;
  for (int i = 0; i < 1000; ++i) {
    s = step(s, [](double) { return ActuatorInput{}; }, i * dt, dt, p);
  }
  const double exact = -0.4 + 0.5 * p.g;
  CHECK(std::abs(s.z - exact) / std::abs(exact) <= 1e-8);
  CHECK(s.phi_dot == 0.0);
  CHECK(s.z_dot == doctest::Approx(p.g).epsilon(1e-12));
}

TEST_CASE("step is bit-identical for identical inputs")
{
  DynamicsParams p;
  FlapperState s{0.1, -0.2, 0.3, 9.0};
  auto input = [&](double t) { return ActuatorInput{0.0, carrier_torque(38.0, t, p)}; };
  const auto a = step(s, input, 0.25, 1e-3, p);
  const auto b = step(s, input, 0.25, 1e-3, p);
  CHECK(a == b);
}

TEST_CASE("step guards dt and divergence")
{
  DynamicsParams p;
  auto zero = [](double) { return ActuatorInput{}; };
  CHECK_THROWS_AS((void)step({}, zero, 0.0, 0.0, p), ConfigError);
  CHECK_THROWS_AS((void)step({}, zero, 0.0, 2e-3, p), ConfigError);
  try {
    (void)step({0, 0, 0, 1e160}, zero, 0.0, 1e-3, p);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError & e) {
    CHECK_FALSE(e.field().empty());
  }
}

TEST_CASE("RK4 self-convergence is fourth order")
{
  DynamicsParams p;
  const FlapperState s0{0.0, 0.3, 0.0, 12.0};
  const double dt = 0.02;
  const auto ref = integrate(s0, 1.0, dt / 32.0, p);
  const double e1 = distance(integrate(s0, 1.0, dt, p), ref);
  const double e2 = distance(integrate(s0, 1.0, dt / 2.0, p), ref);
  const double ratio = e1 / e2;
  MESSAGE("self-convergence ratio " << ratio);
  CHECK(ratio >= 8.0);
  CHECK(ratio <= 32.0);
  CHECK(std::log2(ratio) >= 3.8);
}

TEST_CASE("property: sign structure of vertical acceleration")
{
  DynamicsParams p;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> frac(0.01, 0.99);
  const double v_eq = hover_equilibrium(p);
  for (int i = 0; i < 500; ++i) {
    const double slow = v_eq * frac(rng);
    const double fast = v_eq / frac(rng);
    const double sgn = (i % 2 == 0) ? 1.0 : -1.0;
    CHECK(derivatives({0, 0, 0, sgn * fast}, {}, p).z_dot < 0.0);
    CHECK(derivatives({0, 0, 0, sgn * slow}, {}, p).z_dot > 0.0);
  }
}

TEST_CASE("property: rotational dissipation without torque")
{
  DynamicsParams p;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(-50.0, 50.0);
  for (int i = 0; i < 500; ++i) {
    const double w = rate(rng);
    const auto d = derivatives({0, 0, 0, w}, {}, p);
    CHECK(d.phi_dot * w <= 0.0);
  }
  FlapperState s{0.0, 0.0, 0.0, 20.0};
  double prev = std::abs(s.phi_dot);
  for (int i = 0; i < 2000; ++i) {
    s = step(s, [](double) { return ActuatorInput{}; }, i * 1e-3, 1e-3, p);
    s.z_dot = 0.0;
    CHECK(std::abs(s.phi_dot) <= prev);
    prev = std::abs(s.phi_dot);
  }
}

TEST_CASE("property: free fall from random states keeps the wing still")
{
  DynamicsParams p;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    FlapperState s{u(rng), u(rng), u(rng), 0.0};
    const FlapperState s0 = s;
    for (int i = 0; i < 500; ++i) {
      s = step(s, [](double) { return ActuatorInput{}; }, i * 1e-3, 1e-3, p);
    }
    const double t = 0.5;
    CHECK(s.phi_dot == 0.0);
    CHECK(s.phi == s0.phi);
    CHECK(s.z == doctest::Approx(s0.z + s0.z_dot * t + 0.5 * p.g * t * t).epsilon(1e-10));
  }
}

TEST_CASE("dynamics parameter validation")
{
  auto rejects = [](auto mutate) {
    DynamicsParams p;
    mutate(p);
    CHECK_THROWS_AS(validate(p), ConfigError);
  };
  rejects([](DynamicsParams & p) { p.k_L = 0.0; });
  rejects([](DynamicsParams & p) { p.g = -1.0; });
  rejects([](DynamicsParams & p) { p.kappa_m = 0.0; });
  rejects([](DynamicsParams & p) { p.omega_f = 0.0; });
  rejects([](DynamicsParams & p) { p.k_d1 = -0.1; });
  rejects([](DynamicsParams & p) { p.k_d2 = -0.1; });
  rejects([](DynamicsParams & p) { p.k_d3 = -0.1; });
  CHECK_NOTHROW(validate(DynamicsParams{}));
}

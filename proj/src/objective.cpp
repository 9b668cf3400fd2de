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

#include "flapesc/objective.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "flapesc/errors.hpp"

namespace flapesc::objective
{

void validate(const SourceSchedule & s)
{
  if (s.points.empty()) {
    throw ConfigError("objective.schedule: must have at least one breakpoint");
  }
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto [t, z] = s.points[i];
    if (!std::isfinite(t) || !std::isfinite(z)) {
      throw ConfigError("objective.schedule: breakpoints must be finite");
    }
    if (i > 0 && !(t > s.points[i - 1].first)) {
      throw ConfigError("objective.schedule: breakpoint times must be strictly increasing");
    }
  }
}

void validate(const SensorModel & m)
{
  auto require = [](bool ok, const char * field, const char * rule) {
    if (!ok) {
      throw ConfigError(fmt::format("objective.{}: {}", field, rule));
    }
  };
  require(std::isfinite(m.r_floor) && m.r_floor >= 0.0, "r_floor", "must be >= 0");
  require(std::isfinite(m.gamma) && m.gamma > 0.0, "gamma", "must be > 0");
  require(std::isfinite(m.r_max) && m.r_floor < m.r_max, "r_floor", "must be < r_max");
  require(std::isfinite(m.noise_sigma) && m.noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
  require(m.adc_bits >= 0 && m.adc_bits <= 32, "adc_bits", "must lie in [0, 32]");
}

void validate(const ObjectiveSpec & spec)
{
  if (const auto * q = std::get_if<Quadratic>(&spec)) {
    if (!std::isfinite(q->z_d)) {
      throw ConfigError("objective.z_d: must be finite");
    }
    return;
  }
  const auto & lf = std::get<LightField>(spec);
  validate(lf.schedule);
  validate(lf.sensor);
}

double default_noise_sigma(double r_floor, double r_max) { return 0.01 * (r_max - r_floor); }

double quadratic_eval(double z, double z_d)
{
  const double e = z - z_d;
  return e * e;
}

double source_position(double t, const SourceSchedule & s)
{
  if (s.points.empty()) {
    throw ConfigError("objective.schedule: must have at least one breakpoint");
  }
  const auto & p = s.points;
  if (t < p.front().first) {
    return p.front().second;
  }
  // Last breakpoint with t_i <= t.
  auto it = std::upper_bound(
    p.begin(), p.end(), t, [](double v, const std::pair<double, double> & bp) { return v < bp.first; });
  const auto & lo = *(it - 1);
  if (s.interpolation == Interpolation::step || it == p.end()) {
    return lo.second;
  }
  const double u = (t - lo.first) / (it->first - lo.first);
  return lo.second + u * (it->second - lo.second);
}

double NoiseStream::next(double sigma)
{
  const double n = normal_(engine_);
  return sigma * n;
}

double noise_free_reading(double distance, const SensorModel & m)
{
  const double d2 = distance * distance;
  if (m.falloff == Falloff::quadratic) {
    return m.r_floor + m.gamma * d2;
  }
  const double span = m.r_max - m.r_floor;
  const double d0_sq = span / m.gamma;
  return m.r_floor + span * d2 / (d2 + d0_sq);
}

double quantize(double raw, const SensorModel & m)
{
  if (m.adc_bits == 0) {
    return raw;
  }
  const double q = m.r_max / (std::ldexp(1.0, m.adc_bits) - 1.0);
  return std::round(raw / q) * q;
}

double reading_at(double z, double z_src, const SensorModel & m, NoiseStream & rng)
{
  // Draw even when sigma is 0 so the stream position never depends on config.
  const double noise = rng.next(m.noise_sigma);
  const double raw = noise_free_reading(z - z_src, m) + noise;
  return quantize(std::clamp(raw, 0.0, m.r_max), m);
}

double light_sensor_read(double z, double t, const LightField & field, NoiseStream & rng)
{
  return reading_at(z, source_position(t, field.schedule), field.sensor, rng);
}

}  // namespace flapesc::objective

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

#ifndef FLAPESC_OBJECTIVE_HPP_
#define FLAPESC_OBJECTIVE_HPP_

#include <cstdint>
#include <random>
#include <utility>
#include <variant>
#include <vector>

namespace flapesc::objective
{

enum class Interpolation { step, linear };

struct SourceSchedule
{
  std::vector<std::pair<double, double>> points;  // (t s, z_src mm), t strictly increasing
  Interpolation interpolation{Interpolation::step};
};

// quadratic: r_floor + gamma d^2, clipped at r_max.
// inverse_square: inverted reading of an I0 / (d^2 + d0^2) intensity, scaled so
// the curvature at the source is gamma and the reading tends to r_max far away.
enum class Falloff { quadratic, inverse_square };

struct SensorModel
{
  double r_floor{200.0};  // counts at the source
  double gamma{0.05};     // counts/mm^2
  double noise_sigma{38.95};  // counts, 1% of r_max - r_floor by default
  int adc_bits{12};       // 0 disables quantization
  double r_max{4095.0};   // counts
  Falloff falloff{Falloff::quadratic};
};

struct Quadratic
{
  double z_d{700.0};  // mm
};

struct LightField
{
  SourceSchedule schedule;
  SensorModel sensor;
};

using ObjectiveSpec = std::variant<Quadratic, LightField>;

void validate(const SourceSchedule & schedule);
void validate(const SensorModel & sensor);
void validate(const ObjectiveSpec & spec);

[[nodiscard]] double default_noise_sigma(double r_floor, double r_max);

[[nodiscard]] double quadratic_eval(double z, double z_d);

[[nodiscard]] double source_position(double t, const SourceSchedule & schedule);

// Seeded Gaussian stream. One per simulation, owned by the stepping context.
class NoiseStream
{
public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}
  double next(double sigma);

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

[[nodiscard]] double noise_free_reading(double distance, const SensorModel & sensor);

// Round to the ADC lattice; the step is r_max / (2^bits - 1).
[[nodiscard]] double quantize(double clamped_raw, const SensorModel & sensor);

double reading_at(double z, double z_src, const SensorModel & sensor, NoiseStream & rng);

double light_sensor_read(double z, double t, const LightField & field, NoiseStream & rng);

}  // namespace flapesc::objective

#endif  // FLAPESC_OBJECTIVE_HPP_

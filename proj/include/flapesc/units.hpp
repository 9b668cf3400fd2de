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

#ifndef FLAPESC_UNITS_HPP_
#define FLAPESC_UNITS_HPP_

namespace flapesc::units
{

// Motor commands are carried in percent of full-scale duty. The hardware
// speaks in PWM counts with 100000 counts at full scale, so 38000 counts is a
// command of 38 and a normalized fraction of 0.38.
inline constexpr double pwm_full_scale = 100000.0;
inline constexpr double command_full_scale = 100.0;

constexpr double pwm_to_command(double pwm) { return pwm / pwm_full_scale * command_full_scale; }
constexpr double command_to_pwm(double m) { return m / command_full_scale * pwm_full_scale; }
constexpr double normalized_to_command(double x) { return x * command_full_scale; }
constexpr double command_to_normalized(double m) { return m / command_full_scale; }

// Plant z is metres, positive down. Everything user facing is altitude in mm.
constexpr double altitude_mm(double z_m, double z_ref_mm = 0.0) { return z_ref_mm - 1000.0 * z_m; }
constexpr double plant_z(double altitude, double z_ref_mm = 0.0) { return (z_ref_mm - altitude) / 1000.0; }

}  // namespace flapesc::units

#endif  // FLAPESC_UNITS_HPP_

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

#ifndef FLAPESC_TELEMETRY_IO_HPP_
#define FLAPESC_TELEMETRY_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "flapesc/engine.hpp"

namespace flapesc::tio
{

inline constexpr std::string_view csv_header = "t,z,z_dot,phi_dot,J,J_hp,xi,m_hat,m,z_src";

// INI-style scenario file with [dynamics], [esc], [objective] and [sim].
engine::SimConfig load_config(const std::filesystem::path & path);
engine::SimConfig parse_config(const std::string & text, const std::string & origin = "<memory>");

// "0:700, 40:600" -> breakpoints.
objective::SourceSchedule parse_schedule(std::string_view text, objective::Interpolation interpolation);

std::string format_log(const engine::TelemetryLog & log);
engine::TelemetryLog parse_log(const std::string & text);

void write_log(const std::filesystem::path & path, const engine::TelemetryLog & log);
engine::TelemetryLog read_log(const std::filesystem::path & path);

std::string format_report(const engine::ConvergenceReport & report);

}  // namespace flapesc::tio

#endif  // FLAPESC_TELEMETRY_IO_HPP_

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

#include <cmath>

#include <json.hpp>

#include "flapesc/bridge.hpp"

namespace flapesc::bridge
{

using nlohmann::json;

std::string frame_message(const engine::TelemetryFrame & f)
{
  return json{{"type", "frame"}, {"t", f.t}, {"z", f.z}, {"J", f.J}, {"m", f.m}, {"z_src", f.z_src}}.dump();
}

std::string status_message(bool running, const std::string & scenario)
{
  return json{{"type", "status"}, {"running", running}, {"scenario", scenario}}.dump();
}

std::string error_message(const std::string & reason) { return json{{"type", "error"}, {"reason", reason}}.dump(); }

ClientMessage parse_client_message(const std::string & text)
{
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    return WireError{"malformed record: not JSON"};
  }
  if (!j.is_object()) {
    return WireError{"malformed record: not an object"};
  }
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) {
    return WireError{"malformed record: missing string field 'type'"};
  }
  const auto & name = type->get_ref<const std::string &>();
  if (name == "set_source") {
    const auto z = j.find("z");
    if (z == j.end() || !z->is_number()) {
      return WireError{"set_source: missing numeric field 'z'"};
    }
    const double v = z->get<double>();
    if (!std::isfinite(v)) {
      return WireError{"set_source: z must be finite"};
    }
    return SetSource{v};
  }
  if (name == "pause") {
    return Pause{};
  }
  if (name == "resume") {
    return Resume{};
  }
  if (name == "reset") {
    return Reset{};
  }
  return WireError{"unknown message type '" + name + "'"};
}

}  // namespace flapesc::bridge

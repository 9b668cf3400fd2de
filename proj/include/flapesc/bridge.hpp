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

#ifndef FLAPESC_BRIDGE_HPP_
#define FLAPESC_BRIDGE_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>

#include "flapesc/engine.hpp"

namespace flapesc::bridge
{

// Wire records are one JSON object per websocket text message, keyed by "type".
std::string frame_message(const engine::TelemetryFrame & frame);
std::string status_message(bool running, const std::string & scenario);
std::string error_message(const std::string & reason);

struct SetSource
{
  double z{0.0};
};
struct Pause
{
};
struct Resume
{
};
struct Reset
{
};
struct WireError
{
  std::string reason;
};

using ClientMessage = std::variant<SetSource, Pause, Resume, Reset, WireError>;

ClientMessage parse_client_message(const std::string & text);

struct ServeOptions
{
  std::string bind_address{"127.0.0.1"};
  std::uint16_t port{8765};  // 0 picks a free port
  double rate_hz{50.0};      // frame broadcast rate, wall clock
  double speed{1.0};         // simulated seconds per wall second
  std::filesystem::path log_path{"live.csv"};
  std::size_t client_queue_limit{64};  // frames per client before drop-oldest
  int send_buffer_bytes{0};  // 0 keeps the OS default
};

struct ServerStats
{
  std::uint64_t frames_broadcast{0};
  std::uint64_t frames_dropped{0};
  std::uint64_t clients_accepted{0};
};

// Paced engine plus websocket fan-out. start() binds and returns; stop()
// halts stepping, closes clients and writes the current log segment. A reset
// closes the running segment; later segments get a ".resetN" suffix.
class Server
{
public:
  Server(engine::SimConfig config, ServeOptions options);
  ~Server();
  Server(const Server &) = delete;
  Server & operator=(const Server &) = delete;

  void start();
  void stop();

  [[nodiscard]] std::uint16_t port() const;
  [[nodiscard]] ServerStats stats() const;
  [[nodiscard]] double sim_time() const;

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

// Blocking entry point for the CLI. Returns after SIGINT or SIGTERM.
void serve(const engine::SimConfig & config, const ServeOptions & options);

}  // namespace flapesc::bridge

#endif  // FLAPESC_BRIDGE_HPP_

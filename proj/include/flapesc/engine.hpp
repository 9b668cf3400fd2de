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

#ifndef FLAPESC_ENGINE_HPP_
#define FLAPESC_ENGINE_HPP_

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flapesc/controller.hpp"
#include "flapesc/dynamics.hpp"
#include "flapesc/objective.hpp"

namespace flapesc::engine
{

struct ClosedLoop
{
};

struct OpenLoop
{
  double m_const{38.0};  // command units
};

using Mode = std::variant<ClosedLoop, OpenLoop>;

struct SimConfig
{
  std::string name{"unnamed"};
  double dt{1e-3};
  double dt_max{dynamics::default_dt_max};
  double duration{60.0};
  std::uint64_t seed{1};
  int control_decimation{1};  // controller runs every n plant steps
  double z_ref{0.0};          // mm; altitude = z_ref - 1000 z
  dynamics::DynamicsParams dynamics;
  controller::EscParams esc;
  objective::ObjectiveSpec objective{objective::Quadratic{}};
  dynamics::FlapperState initial_state;
  Mode mode{ClosedLoop{}};
  // Reporting defaults for run / analyze.
  double band{5.0};  // mm
  double hold{10.0};  // s
};

void validate(const SimConfig & config);

[[nodiscard]] std::size_t step_count(const SimConfig & config);

// z and z_dot are altitude (mm, mm/s). z_src carries the target altitude:
// the source for a light field, z_d for the quadratic.
struct TelemetryFrame
{
  double t{0.0};
  double z{0.0};
  double z_dot{0.0};
  double phi_dot{0.0};
  double J{0.0};
  double J_hp{0.0};
  double xi{0.0};
  double m_hat{0.0};
  double m{0.0};
  double z_src{0.0};

  bool operator==(const TelemetryFrame &) const = default;
};

using TelemetryLog = std::vector<TelemetryFrame>;

enum class CommandKind { set_source, pause, resume, reset };

struct Command
{
  double t{0.0};  // applied at the first step boundary >= t
  CommandKind kind{CommandKind::set_source};
  double z{0.0};  // mm, set_source only
};

// Ordered multi-producer queue drained by the stepping context.
class CommandQueue
{
public:
  void push(Command c);
  std::vector<Command> drain();
  // Blocks until a command is available or the timeout passes.
  std::vector<Command> wait_drain(double timeout_s);

private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Command> queue_;
};

// One simulation run. Per boundary i the caller does: apply() any due
// commands, sense() exactly once, then integrate() unless done().
class Simulation
{
public:
  explicit Simulation(SimConfig config);

  void apply(const Command & c);
  const TelemetryFrame & sense();
  void integrate();

  [[nodiscard]] bool done() const { return index_ >= steps_; }
  [[nodiscard]] std::size_t index() const { return index_; }
  [[nodiscard]] std::size_t steps() const { return steps_; }
  [[nodiscard]] double time() const { return static_cast<double>(index_) * config_.dt; }
  [[nodiscard]] const SimConfig & config() const { return config_; }
  [[nodiscard]] const dynamics::FlapperState & state() const { return state_; }
  [[nodiscard]] bool has_light_field() const;

private:
  double source_now(double t) const;

  SimConfig config_;
  std::size_t steps_;
  std::size_t index_{0};
  dynamics::FlapperState state_;
  controller::EscState esc_;
  objective::NoiseStream noise_;
  std::optional<double> source_override_;
  TelemetryFrame frame_;
  controller::EscOutput held_;
  bool sensed_{false};
};

// Headless run. Commands are applied in time order; pause and resume are
// no-ops without a wall clock, reset is rejected.
TelemetryLog run_scenario(const SimConfig & config, std::span<const Command> commands = {});

struct ConvergenceReport
{
  bool converged{false};
  std::optional<double> settle_time;  // s, set when converged
  double terminal_mean_abs_error{0.0};  // mm
  double terminal_band{0.0};  // mm
};

using Target = std::function<double(double)>;

ConvergenceReport detect_convergence(const TelemetryLog & log, const Target & target, double band, double hold);

// Target taken from the z_src column, matched by frame time.
Target target_from_log(const TelemetryLog & log);

struct SpectrumPeak
{
  double frequency{0.0};  // Hz
  double bin_width{0.0};  // Hz
  double peak_to_floor{0.0};  // peak magnitude over median magnitude above f_min
};

inline constexpr std::size_t min_spectrum_samples = 4096;

// Hann-windowed DFT of the trailing power-of-two block, mean removed.
SpectrumPeak spectrum_analysis(std::span<const double> signal, double dt, double f_min);

double spectrum_peak(std::span<const double> signal, double dt, double f_min);

struct Ripple
{
  double z{0.0};  // mm
  double J{0.0};  // objective units
};

// Half peak-to-peak swings over the final window of a noise-free,
// source-frozen copy of the config.
Ripple dither_ripple(const SimConfig & config, double window_s = 5.0);

// Means of J over consecutive complete windows.
std::vector<double> window_means_J(const TelemetryLog & log, double window_s);

inline double acceptance_band(double ripple) { return ripple * 3.0 > 5.0 ? ripple * 3.0 : 5.0; }

std::vector<double> column_J(const TelemetryLog & log);

}  // namespace flapesc::engine

#endif  // FLAPESC_ENGINE_HPP_

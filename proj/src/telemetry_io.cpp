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

#include "flapesc/telemetry_io.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "flapesc/errors.hpp"

namespace flapesc::tio
{
namespace
{

namespace pt = boost::property_tree;

std::string_view trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double & out)
{
  s = trim(s);
  if (!s.empty() && s.front() == '+') {
    s.remove_prefix(1);
  }
  const auto * end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end && !s.empty();
}

// Keys of one section, consumed as they are read so leftovers are unknown.
class Section
{
public:
  Section(std::string name, const pt::ptree & tree) : name_(std::move(name))
  {
    for (const auto & [key, node] : tree) {
      if (!node.empty()) {
        throw ConfigError(fmt::format("{}.{}: nested keys are not allowed", name_, key));
      }
      values_[key] = node.data();
    }
  }

  [[nodiscard]] bool has(const std::string & key) const { return values_.count(key) > 0; }

  std::optional<std::string> take(const std::string & key)
  {
    auto it = values_.find(key);
    if (it == values_.end()) {
      return std::nullopt;
    }
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  void number(const std::string & key, double & out)
  {
    if (auto v = take(key)) {
      if (!parse_double(*v, out)) {
        throw ConfigError(fmt::format("{}.{}: '{}' is not a number", name_, key, *v));
      }
    }
  }

  void integer(const std::string & key, long long & out)
  {
    if (auto v = take(key)) {
      const auto s = trim(*v);
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
        throw ConfigError(fmt::format("{}.{}: '{}' is not an integer", name_, key, *v));
      }
    }
  }

  void flag(const std::string & key, bool & out)
  {
    if (auto v = take(key)) {
      const auto s = trim(*v);
      if (s == "true") {
        out = true;
      } else if (s == "false") {
        out = false;
      } else {
        throw ConfigError(fmt::format("{}.{}: '{}' is not true or false", name_, key, *v));
      }
    }
  }

  void reject(const std::string & key, const std::string & why)
  {
    if (has(key)) {
      throw ConfigError(fmt::format("{}.{}: {}", name_, key, why));
    }
  }

  void finish() const
  {
    if (!values_.empty()) {
      throw ConfigError(fmt::format("{}.{}: unknown key", name_, values_.begin()->first));
    }
  }

  [[nodiscard]] const std::string & name() const { return name_; }

private:
  std::string name_;
  std::map<std::string, std::string> values_;
};

}  // namespace

objective::SourceSchedule parse_schedule(std::string_view text, objective::Interpolation interpolation)
{
  objective::SourceSchedule s;
  s.interpolation = interpolation;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    const auto colon = item.find(':');
    double t = 0.0;
    double z = 0.0;
    if (colon == std::string_view::npos || !parse_double(item.substr(0, colon), t) ||
        !parse_double(item.substr(colon + 1), z)) {
      throw ConfigError(fmt::format("objective.schedule: bad breakpoint '{}', expected t:z", item));
    }
    s.points.emplace_back(t, z);
    if (comma == std::string_view::npos) {
      break;
    }
    pos = comma + 1;
  }
  objective::validate(s);
  return s;
}

engine::SimConfig parse_config(const std::string & text, const std::string & origin)
{
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error & e) {
    throw ConfigError(fmt::format("{}:{}: {}", origin, e.line(), e.message()));
  }

  const std::set<std::string> known{"dynamics", "esc", "objective", "sim"};
  for (const auto & [key, node] : tree) {
    if (node.empty() && !node.data().empty()) {
      throw ConfigError(fmt::format("{}: key '{}' outside a section", origin, key));
    }
    if (known.count(key) == 0) {
      throw ConfigError(fmt::format("{}: unknown section [{}]", origin, key));
    }
  }
  // The INI reader drops sections without keys, so headers are found by scanning.
  std::set<std::string> headers;
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto s = trim(line);
      if (s.size() > 2 && s.front() == '[' && s.back() == ']') {
        headers.emplace(trim(s.substr(1, s.size() - 2)));
      }
    }
  }
  for (const auto & name : headers) {
    if (known.count(name) == 0) {
      throw ConfigError(fmt::format("{}: unknown section [{}]", origin, name));
    }
  }
  for (const auto & name : known) {
    if (headers.count(name) == 0) {
      throw ConfigError(fmt::format("{}: missing section [{}]", origin, name));
    }
  }

  const pt::ptree empty;
  auto child = [&](const std::string & name) -> const pt::ptree & {
    const auto it = tree.find(name);
    return it == tree.not_found() ? empty : it->second;
  };
  engine::SimConfig cfg;
  Section dyn("dynamics", child("dynamics"));
  Section esc("esc", child("esc"));
  Section obj("objective", child("objective"));
  Section sim("sim", child("sim"));

  // [esc] first: omega_f defaults off the dither frequency.
  auto & e = cfg.esc;
  esc.number("omega", e.omega);
  esc.number("k", e.k);
  esc.number("a", e.a);
  esc.number("c", e.c);
  esc.number("h", e.h);
  esc.flag("hpf_enabled", e.hpf_enabled);
  esc.number("m_min", e.m_min);
  esc.number("m_max", e.m_max);
  esc.number("sign", e.sign);
  if (esc.has("m_init")) {
    double v = 0.0;
    esc.number("m_init", v);
    e.m_init = v;
  }
  esc.number("lead", e.lead);
  esc.number("lead_periods", e.lead_periods);
  esc.finish();
  controller::validate(e);

  auto & d = cfg.dynamics;
  dyn.number("k_d1", d.k_d1);
  dyn.number("k_L", d.k_L);
  dyn.number("k_d2", d.k_d2);
  dyn.number("k_d3", d.k_d3);
  dyn.number("g", d.g);
  d.omega_f = 0.5 * e.omega;
  dyn.number("omega_f", d.omega_f);
  const bool kappa_given = dyn.has("kappa_m");
  dyn.number("kappa_m", d.kappa_m);
  dyn.finish();
  if (!kappa_given) {
    if (!(d.k_L > 0.0) || !(d.omega_f > 0.0)) {
      dynamics::validate(d);
    }
    d.kappa_m = dynamics::calibrate_kappa_m(d, 38.0);
  }

  const std::string variant = std::string(trim(obj.take("variant").value_or("quadratic")));
  if (variant == "quadratic") {
    objective::Quadratic q;
    obj.number("z_d", q.z_d);
    for (const char * k : {"schedule", "interpolation", "r_floor", "gamma", "noise_sigma", "adc_bits", "r_max", "falloff"}) {
      obj.reject(k, "not used by variant quadratic");
    }
    cfg.objective = q;
  } else if (variant == "light_field") {
    objective::LightField lf;
    obj.reject("z_d", "not used by variant light_field");
    const std::string interp = std::string(trim(obj.take("interpolation").value_or("step")));
    objective::Interpolation mode;
    if (interp == "step") {
      mode = objective::Interpolation::step;
    } else if (interp == "linear") {
      mode = objective::Interpolation::linear;
    } else {
      throw ConfigError(fmt::format("objective.interpolation: '{}' is not step or linear", interp));
    }
    const auto sched = obj.take("schedule");
    if (!sched) {
      throw ConfigError("objective.schedule: required for variant light_field");
    }
    lf.schedule = parse_schedule(*sched, mode);
    auto & s = lf.sensor;
    obj.number("r_floor", s.r_floor);
    obj.number("gamma", s.gamma);
    obj.number("r_max", s.r_max);
    s.noise_sigma = objective::default_noise_sigma(s.r_floor, s.r_max);
    obj.number("noise_sigma", s.noise_sigma);
    long long bits = s.adc_bits;
    obj.integer("adc_bits", bits);
    if (bits < 0 || bits > 32) {
      throw ConfigError("objective.adc_bits: must lie in [0, 32]");
    }
    s.adc_bits = static_cast<int>(bits);
    const std::string falloff = std::string(trim(obj.take("falloff").value_or("quadratic")));
    if (falloff == "quadratic") {
      s.falloff = objective::Falloff::quadratic;
    } else if (falloff == "inverse_square") {
      s.falloff = objective::Falloff::inverse_square;
    } else {
      throw ConfigError(fmt::format("objective.falloff: '{}' is not quadratic or inverse_square", falloff));
    }
    cfg.objective = lf;
  } else {
    throw ConfigError(fmt::format("objective.variant: '{}' is not quadratic or light_field", variant));
  }
  obj.finish();

  if (auto v = sim.take("name")) {
    cfg.name = std::string(trim(*v));
  }
  sim.number("dt", cfg.dt);
  sim.number("dt_max", cfg.dt_max);
  sim.number("duration", cfg.duration);
  long long seed = static_cast<long long>(cfg.seed);
  sim.integer("seed", seed);
  if (seed < 0) {
    throw ConfigError("sim.seed: must be >= 0");
  }
  cfg.seed = static_cast<std::uint64_t>(seed);
  long long decim = cfg.control_decimation;
  sim.integer("control_decimation", decim);
  if (decim < 1 || decim > 1000000) {
    throw ConfigError("sim.control_decimation: must lie in [1, 1000000]");
  }
  cfg.control_decimation = static_cast<int>(decim);
  sim.number("z_ref", cfg.z_ref);
  sim.number("z", cfg.initial_state.z);
  sim.number("z_dot", cfg.initial_state.z_dot);
  sim.number("phi", cfg.initial_state.phi);
  sim.number("phi_dot", cfg.initial_state.phi_dot);
  sim.number("band", cfg.band);
  sim.number("hold", cfg.hold);
  const std::string mode = std::string(trim(sim.take("mode").value_or("closed_loop")));
  if (mode == "closed_loop") {
    sim.reject("m_const", "only valid with mode = open_loop");
    cfg.mode = engine::ClosedLoop{};
  } else if (mode == "open_loop") {
    engine::OpenLoop ol;
    sim.number("m_const", ol.m_const);
    cfg.mode = ol;
  } else {
    throw ConfigError(fmt::format("sim.mode: '{}' is not closed_loop or open_loop", mode));
  }
  sim.finish();

  engine::validate(cfg);
  return cfg;
}

engine::SimConfig load_config(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("{}: cannot open scenario file", path.string()));
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string format_log(const engine::TelemetryLog & log)
{
  static constexpr const char * names[] = {"t", "z", "z_dot", "phi_dot", "J", "J_hp", "xi", "m_hat", "m", "z_src"};
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "{}\n", csv_header);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto & f = log[i];
    const double row[] = {f.t, f.z, f.z_dot, f.phi_dot, f.J, f.J_hp, f.xi, f.m_hat, f.m, f.z_src};
    for (std::size_t k = 0; k < 10; ++k) {
      if (!std::isfinite(row[k])) {
        throw DivergenceError(
          names[k], fmt::format("refusing to write a divergence artifact: non-finite {} in frame {}", names[k], i),
          i == 0 ? std::nullopt : std::optional(i - 1));
      }
    }
    fmt::format_to(
      std::back_inserter(out), "{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", row[0],
      row[1], row[2], row[3], row[4], row[5], row[6], row[7], row[8], row[9]);
  }
  return fmt::to_string(out);
}

engine::TelemetryLog parse_log(const std::string & text)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != csv_header) {
    throw IoError(fmt::format("telemetry header mismatch: expected '{}'", csv_header));
  }
  engine::TelemetryLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    double v[10];
    std::size_t n = 0;
    std::size_t pos = 0;
    std::string_view sv(line);
    while (true) {
      const auto comma = sv.find(',', pos);
      const auto field = sv.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      if (n >= 10) {
        throw IoError(fmt::format("telemetry line {}: ragged row, more than 10 fields", line_no));
      }
      if (!parse_double(field, v[n])) {
        throw IoError(fmt::format("telemetry line {}: field {} is not a number", line_no, n + 1));
      }
      ++n;
      if (comma == std::string_view::npos) {
        break;
      }
      pos = comma + 1;
    }
    if (n != 10) {
      throw IoError(fmt::format("telemetry line {}: ragged row, {} fields", line_no, n));
    }
    log.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
  }
  return log;
}

void write_log(const std::filesystem::path & path, const engine::TelemetryLog & log)
{
  const std::string text = format_log(log);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError(fmt::format("{}: cannot open for writing", path.string()));
  }
  out << text;
  out.flush();
  if (!out) {
    throw IoError(fmt::format("{}: write failed", path.string()));
  }
}

engine::TelemetryLog read_log(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(fmt::format("{}: cannot open telemetry log", path.string()));
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_log(buf.str());
}

std::string format_report(const engine::ConvergenceReport & r)
{
  return fmt::format(
    "converged={} settle_time={} terminal_mean_abs_error={:.6g} terminal_band={:.6g}", r.converged,
    r.settle_time ? fmt::format("{:.6g}", *r.settle_time) : std::string("none"), r.terminal_mean_abs_error,
    r.terminal_band);
}

}  // namespace flapesc::tio

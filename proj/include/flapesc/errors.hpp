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

#ifndef FLAPESC_ERRORS_HPP_
#define FLAPESC_ERRORS_HPP_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace flapesc
{

// Bad scenario configuration or invalid parameters. CLI exit code 2.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Non-finite state, input or measurement. CLI exit code 3.
class DivergenceError : public std::runtime_error
{
public:
  DivergenceError(std::string field, std::string what, std::optional<std::size_t> last_valid_frame = {});

  [[nodiscard]] const std::string & field() const { return field_; }
  [[nodiscard]] std::optional<std::size_t> last_valid_frame() const { return last_valid_frame_; }

private:
  std::string field_;
  std::optional<std::size_t> last_valid_frame_;
};

// File system or format failure on logs. CLI exit code 4.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace flapesc

#endif  // FLAPESC_ERRORS_HPP_

// Copyright 2026 The FedSampling Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal leveled logging to stderr. Library code reports recoverable
// anomalies (e.g. a non-positive total-size estimate) through log_warn.

#include <atomic>
#include <iostream>
#include <string_view>

namespace fedsampling {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

inline std::atomic<LogLevel>& log_level() {
  static std::atomic<LogLevel> level{LogLevel::kError};
  return level;
}

inline void set_log_level(LogLevel level) { log_level().store(level); }

inline void log_at(LogLevel level, std::string_view msg) {
  if (level < log_level().load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::cerr << "[fedsim " << kNames[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void log_info(std::string_view msg) { log_at(LogLevel::kInfo, msg); }
inline void log_warn(std::string_view msg) { log_at(LogLevel::kWarn, msg); }

}  // namespace fedsampling

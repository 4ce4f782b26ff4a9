// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace omnisched::log {

enum class Level { quiet = 0, error = 1, warn = 2, info = 3, debug = 4 };

// Current level, initialized once from the OMNISCHED_LOG environment variable
// (quiet|error|warn|info|debug; default warn).
Level level();
void set_level(Level lvl);

void emit(Level lvl, const std::string& msg);

inline void error(const std::string& msg) { emit(Level::error, msg); }
inline void warn(const std::string& msg) { emit(Level::warn, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void debug(const std::string& msg) { emit(Level::debug, msg); }

}  // namespace omnisched::log

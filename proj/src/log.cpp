// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace omnisched::log {

namespace {

Level parse_env() {
    const char* env = std::getenv("OMNISCHED_LOG");
    if (env == nullptr) return Level::warn;
    if (std::strcmp(env, "quiet") == 0) return Level::quiet;
    if (std::strcmp(env, "error") == 0) return Level::error;
    if (std::strcmp(env, "warn") == 0) return Level::warn;
    if (std::strcmp(env, "info") == 0) return Level::info;
    if (std::strcmp(env, "debug") == 0) return Level::debug;
    return Level::warn;
}

Level g_level = parse_env();

const char* tag(Level lvl) {
    switch (lvl) {
        case Level::error: return "error";
        case Level::warn: return "warn";
        case Level::info: return "info";
        case Level::debug: return "debug";
        default: return "?";
    }
}

}  // namespace

Level level() { return g_level; }

void set_level(Level lvl) { g_level = lvl; }

void emit(Level lvl, const std::string& msg) {
    if (lvl == Level::quiet || static_cast<int>(lvl) > static_cast<int>(g_level)) return;
    std::fprintf(stderr, "[omnisched %s] %s\n", tag(lvl), msg.c_str());
}

}  // namespace omnisched::log

#pragma once

#include <fmt/core.h>

#include <cstdlib>
#include <cstring>
#include <string_view>

namespace scvx::log {

enum class Level : int { Error = 0, Info = 1, Debug = 2 };

// Verbosity comes from SCVX_DRIVE_LOG (error|info|debug); default is error.
inline Level level() {
  static const Level lvl = [] {
    const char* env = std::getenv("SCVX_DRIVE_LOG");
    if (env == nullptr) return Level::Error;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    if (std::strcmp(env, "info") == 0) return Level::Info;
    return Level::Error;
  }();
  return lvl;
}

template <typename... Args>
void error(fmt::format_string<Args...> f, Args&&... args) {
  fmt::print(stderr, "[error] {}\n", fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void info(fmt::format_string<Args...> f, Args&&... args) {
  if (level() >= Level::Info)
    fmt::print(stderr, "[info] {}\n", fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void debug(fmt::format_string<Args...> f, Args&&... args) {
  if (level() >= Level::Debug)
    fmt::print(stderr, "[debug] {}\n", fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace scvx::log

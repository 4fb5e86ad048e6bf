#pragma once

#include <cstdlib>
#include <memory>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace asymgraph {

/// Shared stderr logger. Level comes from ASYMGRAPH_LOG={error,info,debug}; default info.
inline spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto lg = std::make_shared<spdlog::logger>("asymgraph", sink);
    lg->set_pattern("[%l] %v");
    lg->set_level(spdlog::level::info);
    if (const char* env = std::getenv("ASYMGRAPH_LOG")) {
      const std::string_view v{env};
      if (v == "error") lg->set_level(spdlog::level::err);
      else if (v == "debug") lg->set_level(spdlog::level::debug);
      else if (v == "warn") lg->set_level(spdlog::level::warn);
    }
    return lg;
  }();
  return *instance;
}

}  // namespace asymgraph

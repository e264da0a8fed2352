#include "hmae/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

namespace hmae {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto lg = std::make_shared<spdlog::logger>("hmae", sink);
    lg->set_pattern("[%l] %v");
    lg->set_level(spdlog::level::info);
    return lg;
  }();
  return instance;
}

}  // namespace hmae

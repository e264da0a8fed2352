#pragma once

#include <memory>

#include <spdlog/logger.h>

namespace hmae {

/// Library-wide logger ("hmae"), writes to stderr by default. Tests swap the
/// sinks to capture warnings.
std::shared_ptr<spdlog::logger> logger();

}  // namespace hmae

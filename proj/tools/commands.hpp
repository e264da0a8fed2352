#pragma once

#include <functional>

#include <CLI11.hpp>

namespace hmae::cli {

/// Adds every subcommand to `app`. Parsing a subcommand stores its action in
/// `selected`; nothing runs during parsing.
void register_commands(CLI::App& app, std::function<void()>& selected);

}  // namespace hmae::cli

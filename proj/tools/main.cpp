#include <cstdio>
#include <exception>
#include <functional>
#include <memory>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hmae/error.hpp"
#include "hmae/log.hpp"
#include "run_support.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hmae: hierarchical mid-level action element pipeline"};
  app.set_version_flag("--version", HMAE_VERSION);
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value or JSON file of subcommand options; flags override it");
  app.config_formatter(std::make_shared<hmae::cli::FlatConfig>(&app));
  std::function<void()> selected;
  hmae::cli::register_commands(app, selected);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n\n", e.what());
    const CLI::App* failing = &app;
    for (const CLI::App* sub : app.get_subcommands()) failing = sub;
    std::fputs(failing->help().c_str(), stderr);
    return 1;
  }

  try {
    selected();
  } catch (const hmae::ValidationError& e) {
    hmae::logger()->error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    hmae::logger()->critical("internal error: {}", e.what());
    return 2;
  } catch (...) {
    hmae::logger()->critical("internal error");
    return 2;
  }
  return 0;
}

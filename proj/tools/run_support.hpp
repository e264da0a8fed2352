#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmae/dataset.hpp"

namespace hmae::cli {

/// Config files: a flat JSON object, or key=value lines (TOML/INI syntax).
/// Keys without a section apply to the subcommand being run.
class FlatConfig : public CLI::ConfigTOML {
 public:
  explicit FlatConfig(const CLI::App* root) : root_(root) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

 private:
  std::vector<CLI::ConfigItem> read(const std::string& text) const;
  const CLI::App* root_;
};

/// Run record written next to every output as `<output>.manifest.json`.
class Manifest {
 public:
  Manifest(std::string command, const CLI::App& app);

  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);
  void seed(std::uint64_t seed) { seed_ = seed; }
  /// Writes one manifest per registered output.
  void write() const;

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<std::filesystem::path> inputs_, outputs_;
  std::uint64_t seed_ = 0;
  std::chrono::steady_clock::time_point start_;
};

std::string file_digest(const std::filesystem::path& path);

/// Mode declared by the header line of a dataset or tree file.
Mode peek_mode(const std::filesystem::path& path);
/// True when the file starts with a tree-file header.
bool is_tree_file(const std::filesystem::path& path);

}  // namespace hmae::cli

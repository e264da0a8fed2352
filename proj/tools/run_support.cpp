#include "run_support.hpp"

#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/version.h>

#include "hmae/error.hpp"
#include "hmae/util.hpp"

namespace hmae::cli {

using nlohmann::json;

std::vector<CLI::ConfigItem> FlatConfig::from_config(std::istream& input) const {
  std::stringstream buffer;
  buffer << input.rdbuf();
  auto items = read(buffer.str());
  const auto subs = root_->get_subcommands();
  if (!subs.empty())
    for (auto& item : items)
      if (item.parents.empty()) item.parents = {subs.front()->get_name()};
  return items;
}

std::vector<CLI::ConfigItem> FlatConfig::read(const std::string& text) const {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || text[first] != '{') {
    std::istringstream again(text);
    return CLI::ConfigTOML::from_config(again);
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  std::vector<CLI::ConfigItem> items;
  for (const auto& [key, value] : j.items()) {
    CLI::ConfigItem item;
    item.name = key;
    for (auto& ch : item.name)
      if (ch == '_') ch = '-';
    if (value.is_object()) throw CLI::ConversionError("config key '" + key + "': nested objects are not supported");
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array())
      for (const auto& v : value) item.inputs.push_back(scalar(v));
    else
      item.inputs.push_back(scalar(value));
    items.push_back(std::move(item));
  }
  return items;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(ss.str()));
  return buf;
}

Manifest::Manifest(std::string command, const CLI::App& app)
    : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
  for (const CLI::Option* opt : app.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names[0] == "help" || names[0] == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    config_.emplace_back(names[0], value);
  }
}

void Manifest::input(const std::filesystem::path& path) { inputs_.push_back(path); }
void Manifest::output(const std::filesystem::path& path) { outputs_.push_back(path); }

void Manifest::write() const {
  json config = json::object();
  std::string canonical;
  for (const auto& [k, v] : config_) {
    config[k] = v;
    canonical += k + "=" + v + "\n";
  }
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, fnv1a64(canonical));
  json inputs = json::array();
  for (const auto& p : inputs_) inputs.push_back({{"path", p.string()}, {"fnv1a64", file_digest(p)}});
  json outputs = json::array();
  for (const auto& p : outputs_) outputs.push_back({{"path", p.string()}, {"fnv1a64", file_digest(p)}});

  const auto now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();

  json j{{"command", command_},
         {"inputs", std::move(inputs)},
         {"outputs", std::move(outputs)},
         {"config", std::move(config)},
         {"config_hash", hash},
         {"seed", seed_},
         {"versions",
          {{"hmae", HMAE_VERSION},
           {"compiler", __VERSION__},
           {"cli11", CLI11_VERSION},
           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
           {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                          std::to_string(SPDLOG_VER_PATCH)}}},
         {"wall_time_seconds", wall},
         {"finished_at", stamp}};
  for (const auto& out : outputs_) {
    std::ofstream f(out.string() + ".manifest.json");
    if (!f) throw ValidationError("cannot write manifest for '" + out.string() + "'");
    f << j.dump(1) << '\n';
  }
}

namespace {

json first_line(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path.string() + "': header is not valid JSON: " + e.what());
  }
}

}  // namespace

Mode peek_mode(const std::filesystem::path& path) {
  const auto header = first_line(path);
  if (!header.is_object() || !header.contains("mode") || !header["mode"].is_string())
    throw ValidationError("'" + path.string() + "': header declares no mode");
  return parse_mode(header["mode"].get<std::string>());
}

bool is_tree_file(const std::filesystem::path& path) {
  const auto header = first_line(path);
  return header.is_object() && header.value("format", "") == "hmae-trees";
}

}  // namespace hmae::cli

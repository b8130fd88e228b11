#pragma once

// Run directories and the manifest written into each of them.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "karma/config.hpp"
#include "karma/error.hpp"

namespace karma {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr const char* kOutDirEnv = "KARMA_OUT_DIR";

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;  // full config, so the run can be replayed without the preset table
  std::string config_ref;  // preset name or path as given
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::vector<std::string> outputs;  // relative to the run directory
  double duration_s = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = {{"command", m.command},   {"argv", m.argv},       {"config_ref", m.config_ref},
       {"config", m.config},     {"seed", m.seed},       {"version", m.version},
       {"outputs", m.outputs},   {"duration_s", m.duration_s}};
  if (!m.extra.empty()) j["extra"] = m.extra;
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
  j.at("command").get_to(m.command);
  m.argv = j.value("argv", std::vector<std::string>{});
  m.config_ref = j.value("config_ref", "");
  m.config = j.value("config", nlohmann::json::object());
  j.at("seed").get_to(m.seed);
  j.at("version").get_to(m.version);
  j.at("outputs").get_to(m.outputs);
  m.duration_s = j.value("duration_s", 0.0);
  m.extra = j.value("extra", nlohmann::json::object());
}

// Base directory: explicit flag, else $KARMA_OUT_DIR, else ./runs.
inline std::filesystem::path output_base(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "runs";
}

// Creates <base>/<command>-YYYYMMDD-HHMMSS[-n] and returns it.
inline std::filesystem::path make_run_dir(const std::filesystem::path& base, const std::string& command) {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  std::error_code ec;
  std::filesystem::create_directories(base, ec);
  if (ec) throw IoError("cannot create output directory " + base.string() + ": " + ec.message());
  for (int n = 0;; ++n) {
    auto dir = base / (command + "-" + stamp + (n ? "-" + std::to_string(n) : ""));
    if (std::filesystem::create_directory(dir, ec)) return dir;
    if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  auto out = open_output(dir / "manifest.json");
  out << nlohmann::json(m).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest in " + dir.string());
}

}  // namespace karma

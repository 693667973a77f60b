#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace fairbound {

std::string sha256_hex(std::string_view data);
/// Hash of a file's bytes; throws Error(kIo) when it cannot be read.
std::string sha256_file(const std::filesystem::path& path);
/// Hash identifying an ordered list of feature names.
std::string feature_schema_hash(const std::vector<std::string>& names);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Provenance record written next to every CLI run's outputs.
struct RunManifest {
  std::string subcommand;
  std::string tool_version;
  std::string config_hash;
  std::string config;  ///< resolved option values the hash was taken over
  std::vector<std::pair<std::string, std::string>> inputs;  ///< (path, sha256)
  std::vector<std::uint64_t> seeds;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;
  int exit_code = 0;

  void add_input(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace fairbound

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace slcnn::cli {

struct FileRecord {
  std::string role;
  std::string path;
  std::string digest;
  // False for outputs that carry timings, which differ run to run.
  bool deterministic = true;
};

// Everything needed to repeat an artifact-producing command. `argv` is the
// canonical command line with every option spelled out, so defaults changing
// between versions cannot alter a rerun.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::string tool_version;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace slcnn::cli

#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "slcnn/error.hpp"

namespace slcnn::cli {
namespace {

nlohmann::json records_json(const std::vector<FileRecord>& records) {
  auto a = nlohmann::json::array();
  for (const auto& r : records) {
    a.push_back({{"role", r.role}, {"path", r.path}, {"digest", r.digest}, {"deterministic", r.deterministic}});
  }
  return a;
}

std::vector<FileRecord> records_from(const nlohmann::json& a) {
  std::vector<FileRecord> out;
  for (const auto& r : a) {
    out.push_back({r.at("role").get<std::string>(), r.at("path").get<std::string>(),
                   r.at("digest").get<std::string>(), r.value("deterministic", true)});
  }
  return out;
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  return {
      {"schema", "slcnn.run_manifest/1"},
      {"command", command},
      {"argv", argv},
      {"config", config},
      {"seeds", seeds},
      {"inputs", records_json(inputs)},
      {"outputs", records_json(outputs)},
      {"tool_version", tool_version},
      {"started_at", started_at},
      {"finished_at", finished_at},
  };
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "slcnn.run_manifest/1") {
      throw FormatError("unsupported manifest schema " + j.at("schema").dump());
    }
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.seeds = j.at("seeds");
    m.inputs = records_from(j.at("inputs"));
    m.outputs = records_from(j.at("outputs"));
    m.tool_version = j.at("tool_version").get<std::string>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid run manifest: ") + e.what());
  }
}

void RunManifest::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_json().dump(2) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  try {
    return from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace slcnn::cli

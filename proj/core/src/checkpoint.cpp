#include "slcnn/checkpoint.hpp"

#include "slcnn/binary_io.hpp"
#include "slcnn/error.hpp"
#include "slcnn/rng.hpp"

namespace slcnn {
namespace {

std::uint64_t checksum(std::span<const std::uint8_t> bytes) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  ByteWriter w;
  w.put_bytes(std::string_view("SLCN"));
  w.put_u16(kCheckpointVersion);
  const std::string config = model.config().to_json().dump();
  w.put_u32(static_cast<std::uint32_t>(config.size()));
  w.put_bytes(config);
  const auto views = model.parameters().views(model.config());
  w.put_u32(static_cast<std::uint32_t>(views.size()));
  for (const auto& v : views) {
    w.put_u16(static_cast<std::uint16_t>(v.name.size()));
    w.put_bytes(v.name);
    w.put_u8(static_cast<std::uint8_t>(v.shape.size()));
    for (const auto d : v.shape) w.put_u32(static_cast<std::uint32_t>(d));
    for (const float x : v.values) w.put_f32(x);
  }
  w.put_u64(checksum(w.bytes()));
  write_file_bytes(path, w.bytes());
}

Model load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  const auto bytes = read_file_bytes(path);
  const std::string where = "checkpoint " + path.string();
  if (bytes.size() < 4 + 2 + 8) throw FormatError(where + ": corrupt checkpoint (truncated)");
  ByteReader r(bytes, where + ": corrupt checkpoint");
  if (r.get_string(4) != "SLCN") throw FormatError(where + ": not a checkpoint (bad magic)");
  if (const auto version = r.get_u16(); version != kCheckpointVersion) {
    throw FormatError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  ByteReader tail(std::span<const std::uint8_t>(bytes).subspan(bytes.size() - 8), where);
  if (tail.get_u64() != checksum(body)) throw FormatError(where + ": corrupt checkpoint (checksum mismatch)");

  const auto config_text = r.get_string(r.get_u32());
  ModelConfig config;
  try {
    config = ModelConfig::from_json(nlohmann::json::parse(config_text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": invalid config JSON: " + e.what());
  }
  if (expected && !expected->same_architecture(config)) {
    throw ConfigError(where + ": config mismatch: checkpoint holds " + config.to_json().dump() +
                      ", expected architecture " + expected->to_json().dump());
  }

  auto params = make_parameters<float>(config);
  auto views = params.views(config);
  const auto blocks = r.get_u32();
  if (blocks != views.size()) {
    throw FormatError(where + ": expected " + std::to_string(views.size()) + " parameter blocks, found " +
                      std::to_string(blocks));
  }
  for (auto& v : views) {
    const auto name = r.get_string(r.get_u16());
    if (name != v.name) throw FormatError(where + ": expected block " + v.name + ", found " + name);
    const auto rank = r.get_u8();
    if (rank != v.shape.size()) throw FormatError(where + ": block " + name + " has the wrong rank");
    for (const auto d : v.shape) {
      if (r.get_u32() != d) throw FormatError(where + ": block " + name + " has the wrong shape");
    }
    r.get_f32_array(v.values);
  }
  if (r.remaining() != 8) throw FormatError(where + ": trailing bytes before checksum");
  return Model(config, std::move(params));
}

}  // namespace slcnn

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sta/params.hpp"
#include "sta/tensor_io.hpp"

namespace sta {
namespace {

constexpr int kFormatVersion = 1;

nlohmann::json read_manifest(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "STCK", 4) != 0)
    throw ValidationError("bad checkpoint: missing STCK magic");
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 4);
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (!is) throw ValidationError("truncated checkpoint manifest");
  nlohmann::json m = nlohmann::json::parse(text, nullptr, false);
  if (m.is_discarded()) throw ValidationError("checkpoint manifest is not valid JSON");
  if (m.value("format_version", -1) != kFormatVersion)
    throw ValidationError("unsupported checkpoint format version");
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& store,
                     const std::string& config_json) {
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["config"] = config_json;
  auto& params = manifest["params"] = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    nlohmann::json p;
    p["name"] = store.name_at(i);
    p["shape"] = store.tensor_at(i).shape();
    params.push_back(std::move(p));
  }
  const std::string text = manifest.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  os.write("STCK", 4);
  const std::uint32_t len = static_cast<std::uint32_t>(text.size());
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(text.data(), len);
  for (std::size_t i = 0; i < store.size(); ++i) write_tensor(os, store.tensor_at(i));
  if (!os) throw ValidationError("checkpoint write failed");
}

std::string load_checkpoint(const std::string& path, ParamStore<float>& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  const nlohmann::json manifest = read_manifest(is);
  const auto& params = manifest.at("params");
  if (params.size() != store.size())
    throw ValidationError("checkpoint holds " + std::to_string(params.size()) +
                          " parameters, model expects " + std::to_string(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string name = params[i].at("name").get<std::string>();
    if (name != store.name_at(i))
      throw ValidationError("checkpoint parameter '" + name + "' does not match model '" +
                            store.name_at(i) + "' at slot " + std::to_string(i));
    TensorF t = read_tensor_f32(is);
    auto& dst = store.tensor_at(i);
    if (t.shape() != dst.shape())
      throw ValidationError("checkpoint shape " + shape_str(t.shape()) + " for '" + name +
                            "' does not match model " + shape_str(dst.shape()));
    dst.mutable_data() = t.data();
  }
  return manifest.at("config").get<std::string>();
}

std::string read_checkpoint_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  return read_manifest(is).at("config").get<std::string>();
}

}  // namespace sta

#include "smoky/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "smoky/errors.hpp"

namespace smoky::nn {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'K', 'Y', 'C', 'K', 'P', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

nlohmann::json read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ConfigError(path.string() + ": not a checkpoint file");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw ConfigError(path.string() + ": corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ConfigError(path.string() + ": truncated checkpoint header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const StateList& state) {
  nlohmann::json header;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : state) header["tensors"].push_back({{"name", name}, {"shape", t->shape()}});
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, 8);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(len));
  for (const auto& entry : state) {
    const Tensor* t = entry.second;
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_header(in, path).value("meta", nlohmann::json::object());
}

void load_checkpoint(const std::filesystem::path& path, const StateList& state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const auto header = read_header(in, path);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != state.size()) {
    throw ConfigError(path.string() + ": tensor count does not match the model");
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& [name, t] = state[i];
    if (tensors[i].at("name").get<std::string>() != name ||
        tensors[i].at("shape").get<std::vector<int>>() != t->shape()) {
      throw ConfigError(path.string() + ": tensor '" + name + "' does not match the model");
    }
  }
  for (const auto& entry : state) {
    Tensor* t = entry.second;
    in.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(t->size() * sizeof(float)));
    if (!in) throw IoError(path.string() + ": truncated tensor payload");
  }
}

}  // namespace smoky::nn

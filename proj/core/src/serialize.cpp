#include "nar/serialize.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little, "raw f32 tensor files are little-endian");

namespace nar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string tensor_file_name(const std::string& path) {
  std::string name;
  name.reserve(path.size() + 4);
  for (char c : path) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    name.push_back(ok ? c : '_');
  }
  return name + ".bin";
}

}  // namespace

void atomic_write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void save_parameter_set(const fs::path& dir, const ParameterSet& params) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = params.version();
  json tensors = json::object();
  for (const auto& [path, tensor] : params.items()) {
    const std::string file = tensor_file_name(path);
    tensors[path] = {{"shape", tensor.shape()}, {"dtype", "f32"}, {"offset", 0}, {"file", file}};
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(tensor.numel())));
  }
  manifest["tensors"] = std::move(tensors);
  atomic_write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ParameterSet load_parameter_set(const fs::path& dir) {
  const json manifest = json::parse(read_text(dir / "manifest.json"));
  ParameterSet ps;
  ps.set_version(manifest.value("version", std::string("1")));
  for (const auto& [path, entry] : manifest.at("tensors").items()) {
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw std::runtime_error("parameter '" + path + "': unsupported dtype");
    }
    const auto offset = entry.at("offset").get<std::streamoff>();
    const fs::path file = dir / entry.at("file").get<std::string>();
    const int64_t count = Tensor::numel_of(shape);
    std::vector<float> data(static_cast<size_t>(count));
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    in.seekg(offset);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(sizeof(float) * data.size()));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(float) * data.size())) {
      throw std::runtime_error("parameter '" + path + "': truncated tensor file " + file.string());
    }
    ps.insert(path, Tensor(shape, std::move(data)));
  }
  return ps;
}

}  // namespace nar

#include "aef/nn/serialize.hpp"

#include "aef/log.hpp"

#include <cstring>
#include <fstream>

namespace aef::nn {

namespace fs = std::filesystem;

static constexpr uint32_t kMagic = 0x57464541;  // "AEFW"
static constexpr uint32_t kVersion = 1;

template <typename T>
static void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
static T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void save_weights(const fs::path& file, const std::vector<Param*>& params) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(cat("cannot write weights: ", file.string()));
  put(out, kMagic);
  put(out, kVersion);
  put(out, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    put(out, static_cast<uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put(out, static_cast<uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) put(out, static_cast<int32_t>(d));
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.data.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error(cat("short write: ", file.string()));
}

void load_weights(const fs::path& file, const std::vector<Param*>& params) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UserError(cat("cannot read weights: ", file.string()));
  if (get<uint32_t>(in) != kMagic || get<uint32_t>(in) != kVersion)
    throw UserError(cat("not a weights file: ", file.string()));
  const uint32_t count = get<uint32_t>(in);

  std::map<std::string, Param*> by_name;
  for (auto* p : params) by_name[p->name] = p;
  size_t loaded = 0;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t ndim = get<uint32_t>(in);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = get<int32_t>(in);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw UserError(cat("weights file has unknown tensor ", name));
    if (it->second->value.shape != shape)
      throw UserError(cat("shape mismatch for tensor ", name));
    it->second->value = std::move(t);
    ++loaded;
  }
  if (!in || loaded != params.size())
    throw UserError(cat("weights file incomplete: ", file.string()));
}

std::map<std::string, Tensor> snapshot(const std::vector<Param*>& params) {
  std::map<std::string, Tensor> out;
  for (const auto* p : params) out[p->name] = p->value;
  return out;
}

void restore(const std::map<std::string, Tensor>& snap,
             const std::vector<Param*>& params) {
  for (auto* p : params) p->value = snap.at(p->name);
}

}  // namespace aef::nn

#include "gfl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "op_detail.hpp"

namespace gfl {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const NamedTensor& nt : arrays)
    if (nt.name == name) return &nt.tensor;
  return nullptr;
}

double Checkpoint::scalar(std::string_view name) const {
  const Tensor* t = find(name);
  detail::require(t != nullptr && t->numel() == 1,
                  "checkpoint: missing scalar " + std::string(name));
  return (*t)[0];
}

void Checkpoint::put_scalar(std::string name, double v) {
  arrays.push_back({std::move(name), Tensor::scalar(v)});
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  detail::require(static_cast<bool>(os), "checkpoint: cannot open for write: " + path);
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_u64(os, ck.config_text.size());
  os.write(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
  put_u64(os, ck.arrays.size());
  for (const NamedTensor& nt : ck.arrays) {
    put_u64(os, nt.name.size());
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    put_u32(os, static_cast<uint32_t>(nt.tensor.rank()));
    for (int i = 0; i < nt.tensor.rank(); ++i)
      put_u64(os, static_cast<uint64_t>(nt.tensor.dim(i)));
    for (int64_t i = 0; i < nt.tensor.numel(); ++i) put_f64(os, nt.tensor[i]);
  }
  detail::require(static_cast<bool>(os), "checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  detail::require(static_cast<bool>(is), "checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  detail::require(is && std::memcmp(magic, kMagic, 8) == 0,
                  "checkpoint: bad magic in " + path);
  const uint32_t version = get_u32(is);
  detail::require(version == kVersion, "checkpoint: unsupported version");
  Checkpoint ck;
  const uint64_t cfg_len = get_u64(is);
  ck.config_text.resize(cfg_len);
  is.read(ck.config_text.data(), static_cast<std::streamsize>(cfg_len));
  const uint64_t count = get_u64(is);
  ck.arrays.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const uint64_t name_len = get_u64(is);
    nt.name.resize(name_len);
    is.read(nt.name.data(), static_cast<std::streamsize>(name_len));
    const uint32_t rank = get_u32(is);
    std::vector<int64_t> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(get_u64(is));
    Tensor t(shape);
    for (int64_t j = 0; j < t.numel(); ++j) t[j] = get_f64(is);
    nt.tensor = std::move(t);
    ck.arrays.push_back(std::move(nt));
    detail::require(static_cast<bool>(is), "checkpoint: truncated file " + path);
  }
  return ck;
}

}  // namespace gfl

#include "treesrl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace treesrl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'R', 'S', 'R', 'L', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw data_error("truncated checkpoint");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  std::uint32_t len = get<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw data_error("truncated checkpoint");
  return s;
}

}  // namespace

const std::string* Checkpoint::section(const std::string& name) const {
  for (const auto& [n, text] : sections)
    if (n == name) return &text;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, ckpt.config_text.size());
  out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.sections.size()));
  for (const auto& [name, text] : ckpt.sections) {
    put_string(out, name);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.t.size()));
  for (const auto& [name, tensor] : ckpt.params.t) {
    put_string(out, name);
    put<std::uint8_t>(out, ckpt.params.frozen.count(name) ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (std::size_t d : tensor.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(tensor.v.data()),
              static_cast<std::streamsize>(tensor.v.size() * sizeof(double)));
  }
}

void save_checkpoint_file(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write checkpoint: " + path);
  save_checkpoint(ckpt, out);
}

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  std::ostringstream out;
  save_checkpoint(ckpt, out);
  return out.str();
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw data_error("not a checkpoint file (bad magic)");
  std::uint32_t version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw data_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  std::uint64_t cfg_len = get<std::uint64_t>(in);
  ckpt.config_text.resize(cfg_len);
  in.read(ckpt.config_text.data(), static_cast<std::streamsize>(cfg_len));
  if (!in) throw data_error("truncated checkpoint");
  std::uint32_t n_sections = get<std::uint32_t>(in);
  for (std::uint32_t s = 0; s < n_sections; ++s) {
    std::string name = get_string(in);
    std::uint64_t len = get<std::uint64_t>(in);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw data_error("truncated checkpoint");
    ckpt.sections.emplace_back(std::move(name), std::move(text));
  }
  std::uint32_t n_tensors = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = get_string(in);
    bool frozen = get<std::uint8_t>(in) != 0;
    std::uint32_t ndims = get<std::uint32_t>(in);
    std::vector<std::size_t> shape(ndims);
    for (std::uint32_t d = 0; d < ndims; ++d)
      shape[d] = static_cast<std::size_t>(get<std::uint64_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!in) throw data_error("truncated checkpoint");
    ckpt.params.t.emplace(name, std::move(t));
    if (frozen) ckpt.params.frozen.insert(name);
  }
  return ckpt;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace treesrl

#include "bdet/io.hpp"

#include <cstring>
#include <fstream>

namespace bdet {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("tensor io: truncated stream");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_tensor_blob(std::ostream& os, const Tensor4f& t) {
  os.write("TNS4", 4);
  put_u32(os, static_cast<std::uint32_t>(t.batch()));
  put_u32(os, static_cast<std::uint32_t>(t.channels()));
  put_u32(os, static_cast<std::uint32_t>(t.height()));
  put_u32(os, static_cast<std::uint32_t>(t.width()));
  // f32 payload, little-endian; this targets little-endian hosts
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(float)));
}

Tensor4f read_tensor_blob(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TNS4", 4) != 0)
    throw std::runtime_error("tensor io: bad magic");
  const int b = static_cast<int>(get_u32(is));
  const int c = static_cast<int>(get_u32(is));
  const int h = static_cast<int>(get_u32(is));
  const int w = static_cast<int>(get_u32(is));
  Tensor4f t(b, c, h, w);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!is) throw std::runtime_error("tensor io: truncated payload");
  return t;
}

}  // namespace

void save_tensor(const Tensor4f& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  write_tensor_blob(os, t);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor4f load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_tensor_blob(is);
}

void save_checkpoint(const NamedTensors& tensors, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("BDET", 4);
  put_u32(os, 1);  // version
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor_blob(os, t);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "BDET", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = get_u32(is);
  if (version != 1)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  const std::uint32_t count = get_u32(is);
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw std::runtime_error("checkpoint: truncated name");
    out.emplace_back(std::move(name), read_tensor_blob(is));
  }
  return out;
}

}  // namespace bdet

#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nesylab/io.hpp"
#include "nesylab/tensor.hpp"

namespace nesylab::models {

// Named tensors plus string metadata, serialized little-endian with raw
// IEEE-754 payloads. Meta lives in a sorted map and tensors keep insertion
// order, so save -> load -> save reproduces the file byte for byte.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, ad::Tensor>> tensors;
};

namespace detail {

inline constexpr std::uint32_t kCkptMagic = 0x4C59534E;  // "NSYL"
inline constexpr std::uint32_t kCkptVersion = 1;

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) {
      throw std::runtime_error("truncated checkpoint");
    }
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    }
    pos += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    }
    pos += 8;
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out;
  detail::put_u32(out, detail::kCkptMagic);
  detail::put_u32(out, detail::kCkptVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    detail::put_str(out, k);
    detail::put_str(out, v);
  }
  detail::put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    detail::put_str(out, name);
    detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) detail::put_u64(out, d);
    for (double v : t.data) detail::put_f64(out, v);
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& buf) {
  detail::Reader r{buf};
  if (r.u32() != detail::kCkptMagic) {
    throw std::runtime_error("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != detail::kCkptVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint c;
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    c.meta.emplace(std::move(k), std::move(v));
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape;
    shape.reserve(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<std::size_t>(r.u64()));
    }
    ad::Tensor t(shape);
    for (double& v : t.data) v = r.f64();
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos != buf.size()) {
    throw std::runtime_error("trailing bytes after checkpoint payload");
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace nesylab::models

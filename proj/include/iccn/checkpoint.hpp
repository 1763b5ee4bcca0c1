#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iccn/errors.hpp"
#include "iccn/layers.hpp"
#include "iccn/tensor.hpp"

namespace iccn {

// Checkpoint format: magic "ICCN1", then named tensors until EOF. Each
// tensor: name length, name bytes, shape rank, dims (all 8-byte little-
// endian unsigned), then the payload as 64-bit IEEE-754 little-endian.
// Tensors are written sorted by name so files are canonical.

namespace detail {

inline void ckpt_put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t ckpt_get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(
    const std::filesystem::path& path,
    std::vector<std::pair<std::string, const Tensor*>> named) {
  std::sort(named.begin(), named.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("save_checkpoint: cannot open '" + tmp.string() + "'");
    os.write("ICCN1", 5);
    for (const auto& [name, tensor] : named) {
      detail::ckpt_put_u64(os, name.size());
      os.write(name.data(), static_cast<long>(name.size()));
      detail::ckpt_put_u64(os, tensor->rank());
      for (std::size_t d : tensor->shape()) detail::ckpt_put_u64(os, d);
      for (std::size_t i = 0; i < tensor->numel(); ++i) {
        std::uint64_t bits;
        double v = (*tensor)[i];
        std::memcpy(&bits, &v, 8);
        detail::ckpt_put_u64(os, bits);
      }
    }
    if (!os) throw DataError("save_checkpoint: write failed");
  }
  std::filesystem::rename(tmp, path);
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const nn::ParamRefs& params) {
  std::vector<std::pair<std::string, const Tensor*>> named;
  named.reserve(params.size());
  for (const nn::Parameter* p : params) named.emplace_back(p->name, &p->value);
  save_checkpoint(path, std::move(named));
}

inline std::map<std::string, Tensor> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("load_checkpoint: cannot open '" + path.string() + "'");
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "ICCN1", 5) != 0) {
    throw ParseError("load_checkpoint: '" + path.string() +
                     "' is not an ICCN1 checkpoint");
  }
  std::map<std::string, Tensor> out;
  while (true) {
    const std::uint64_t name_len = detail::ckpt_get_u64(is);
    if (is.eof()) break;
    if (!is) throw ParseError("load_checkpoint: truncated name length");
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<long>(name_len));
    const std::uint64_t rank = detail::ckpt_get_u64(is);
    Shape shape(rank);
    for (auto& d : shape) d = detail::ckpt_get_u64(is);
    if (!is) throw ParseError("load_checkpoint: truncated header for '" + name + "'");
    Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const std::uint64_t bits = detail::ckpt_get_u64(is);
      double v;
      std::memcpy(&v, &bits, 8);
      t[i] = v;
    }
    if (!is) throw ParseError("load_checkpoint: truncated payload for '" + name + "'");
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

/// Restore parameter values by name; every parameter must be present with
/// a matching shape.
inline void restore_params(const nn::ParamRefs& params,
                           const std::map<std::string, Tensor>& ckpt) {
  for (nn::Parameter* p : params) {
    auto it = ckpt.find(p->name);
    if (it == ckpt.end()) {
      throw DataError("checkpoint: missing tensor '" + p->name + "'");
    }
    if (it->second.shape() != p->value.shape()) {
      throw DataError("checkpoint: tensor '" + p->name + "' has shape " +
                      shape_str(it->second.shape()) + ", expected " +
                      shape_str(p->value.shape()));
    }
    p->value = it->second;
  }
}

}  // namespace iccn

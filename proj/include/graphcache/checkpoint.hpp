#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "graphcache/common.hpp"
#include "graphcache/linalg.hpp"

namespace graphcache {

// Tensor container for the "GCK1" checkpoint format: magic, then per tensor
// (u64 name length, name bytes, u64 rank, u64 dims..., row-major f64 data),
// all little-endian, until end of file.
struct Checkpoint {
  struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<double> data;
  };
  std::map<std::string, Tensor> tensors;

  void add(const std::string& name, const Matrix& m) {
    tensors[name] = Tensor{{m.rows, m.cols}, m.a};
  }
  void add(const std::string& name, const Vec& v) {
    tensors[name] = Tensor{{v.size()}, v};
  }

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw DataError("checkpoint is missing tensor '" + name + "'");
    return it->second;
  }

  Matrix matrix(const std::string& name) const {
    const Tensor& t = at(name);
    if (t.dims.size() != 2)
      throw DataError("tensor '" + name + "' is not a matrix");
    Matrix m(t.dims[0], t.dims[1]);
    m.a = t.data;
    return m;
  }

  Vec vec(const std::string& name) const {
    const Tensor& t = at(name);
    if (t.dims.size() != 1)
      throw DataError("tensor '" + name + "' is not a vector");
    return t.data;
  }
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out.write("GCK1", 4);
  for (const auto& [name, t] : ck.tensors) {
    detail::put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(out, t.dims.size());
    for (std::size_t d : t.dims) detail::put_u64(out, d);
    for (double v : t.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      detail::put_u64(out, bits);
    }
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "GCK1", 4) != 0)
    throw DataError("not a checkpoint file: " + path);
  Checkpoint ck;
  while (true) {
    std::uint64_t name_len = detail::get_u64(in);
    if (!in) break;  // clean end of file
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    std::uint64_t rank = detail::get_u64(in);
    Checkpoint::Tensor t;
    std::size_t total = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      std::size_t d = static_cast<std::size_t>(detail::get_u64(in));
      t.dims.push_back(d);
      total *= d;
    }
    t.data.resize(total);
    for (auto& v : t.data) {
      std::uint64_t bits = detail::get_u64(in);
      std::memcpy(&v, &bits, 8);
    }
    if (!in) throw DataError("truncated checkpoint file: " + path);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

}  // namespace graphcache

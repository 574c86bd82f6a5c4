#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "carmi/error.hpp"

namespace carmi::bin {

// Little-endian hosts only; checkpoints are not meant to move between architectures.

template <class T>
  requires std::is_trivially_copyable_v<T>
void write(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
  requires std::is_trivially_copyable_v<T>
T read(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint truncated");
  return v;
}

template <class T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  write<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
std::vector<T> read_vec(std::istream& in, std::uint64_t limit = 1ULL << 32) {
  const auto n = read<std::uint64_t>(in);
  if (n > limit) throw Error("checkpoint corrupt: vector length " + std::to_string(n));
  std::vector<T> v(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw Error("checkpoint truncated");
  return v;
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_vec(out, std::vector<char>(s.begin(), s.end()));
}

inline std::string read_str(std::istream& in) {
  const auto v = read_vec<char>(in);
  return {v.begin(), v.end()};
}

}  // namespace carmi::bin

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "kakeya/grid.hpp"

namespace kakeya {

// KKYM mask file: magic "KKYM", little-endian u32 d, u32 extents[d],
// f64 origin[d], f64 h, then the bitset (axis 0 fastest) packed LSB-first
// and padded to a byte boundary. Round-trip is bit-exact.

namespace detail {
static_assert(std::endian::native == std::endian::little,
              "KKYM writer assumes a little-endian host");

template <class T>
inline void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
inline T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw parameter_error("KKYM: truncated file");
  return v;
}
}  // namespace detail

template <int D>
inline void write_mask(std::ostream& os, const SetMask<D>& m) {
  const auto& g = m.grid();
  os.write("KKYM", 4);
  detail::put<std::uint32_t>(os, D);
  for (int i = 0; i < D; ++i)
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(g.extents()[i]));
  for (int i = 0; i < D; ++i) detail::put<double>(os, g.origin()[i]);
  detail::put<double>(os, g.h());
  const auto nbytes = static_cast<std::size_t>((g.size() + 7) / 8);
  os.write(reinterpret_cast<const char*>(m.words().data()),
           static_cast<std::streamsize>(nbytes));
}

template <int D>
inline void write_mask_file(const std::string& path, const SetMask<D>& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw parameter_error("KKYM: cannot open " + path);
  write_mask(os, m);
}

inline std::uint32_t peek_mask_dimension(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw parameter_error("KKYM: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "KKYM", 4) != 0)
    throw parameter_error("KKYM: bad magic in " + path);
  return detail::get<std::uint32_t>(is);
}

template <int D>
inline SetMask<D> read_mask(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "KKYM", 4) != 0) throw parameter_error("KKYM: bad magic");
  auto d = detail::get<std::uint32_t>(is);
  if (d != static_cast<std::uint32_t>(D)) throw parameter_error("KKYM: dimension mismatch");
  IVec<D> ext;
  for (int i = 0; i < D; ++i) ext[i] = detail::get<std::uint32_t>(is);
  Vec<D> origin;
  for (int i = 0; i < D; ++i) origin[i] = detail::get<double>(is);
  double h = detail::get<double>(is);
  auto grid = std::make_shared<const VoxelGrid<D>>(origin, h, ext);
  const auto nbytes = static_cast<std::size_t>((grid->size() + 7) / 8);
  std::vector<std::uint64_t> words((grid->size() + 63) / 64, 0);
  is.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(nbytes));
  if (!is) throw parameter_error("KKYM: truncated bitset");
  return SetMask<D>(std::move(grid), std::move(words));
}

template <int D>
inline SetMask<D> read_mask_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw parameter_error("KKYM: cannot open " + path);
  return read_mask<D>(is);
}

}  // namespace kakeya

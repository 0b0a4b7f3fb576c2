#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"

namespace depthadv {

// Dense n-dimensional array, row-major, templated on the scalar type.
// Production code uses float; tests instantiate double where a high
// precision reference is needed.
template <typename T = float>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty, or same length as data

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (std::size_t(numel()) != data.size())
      throw ShapeError("tensor data length does not match shape");
  }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int e : shape) {
      if (e <= 0) throw ShapeError("non-positive extent in shape");
      n *= e;
    }
    return n;
  }

  int rank() const { return int(shape.size()); }

  T* begin() { return data.data(); }
  T* end() { return data.data() + data.size(); }
  const T* begin() const { return data.data(); }
  const T* end() const { return data.data() + data.size(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
};

template <typename T>
inline bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape == b.shape;
}

template <typename T>
inline bool all_finite(const Tensor<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(double(v))) return false;
  return true;
}

template <typename To, typename From>
inline Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape);
  for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = To(t.data[i]);
  return out;
}

template <typename T>
inline Tensor<T> full_like(const Tensor<T>& t, T value) {
  Tensor<T> out(t.shape);
  std::fill(out.data.begin(), out.data.end(), value);
  return out;
}

// Clamp every element to [-xi, xi]. Elements already inside are untouched.
template <typename T>
inline Tensor<T> clip_inf(const Tensor<T>& t, T xi) {
  if (xi < T(0)) throw ConfigError("clip_inf: negative bound");
  Tensor<T> out = t;
  for (T& v : out.data) v = std::clamp(v, -xi, xi);
  return out;
}

template <typename T>
inline T max_abs(const Tensor<T>& t) {
  T m = T(0);
  for (T v : t.data) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
inline double mean_abs(const Tensor<T>& t) {
  double s = 0.0;
  for (T v : t.data) s += std::abs(double(v));
  return t.data.empty() ? 0.0 : s / double(t.data.size());
}

// --- DTNS serialization ------------------------------------------------
//
// magic "DTNS" | u32 rank | rank x u32 extents | f32 payload, all
// little-endian, row-major. The on-disk scalar type is always f32.

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IOError("dtns: truncated header");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

inline std::uint32_t f32_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

inline float bits_f32(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}
}  // namespace detail

template <typename T>
inline void save_dtns(std::ostream& os, const Tensor<T>& t) {
  os.write("DTNS", 4);
  detail::put_u32(os, std::uint32_t(t.shape.size()));
  for (int e : t.shape) detail::put_u32(os, std::uint32_t(e));
  for (T v : t.data) detail::put_u32(os, detail::f32_bits(float(v)));
  if (!os) throw IOError("dtns: write failed");
}

template <typename T>
inline void save_dtns(const std::string& path, const Tensor<T>& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IOError("dtns: cannot open for write: " + path);
  save_dtns(f, t);
}

inline Tensor<float> load_dtns(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DTNS", 4) != 0) throw IOError("dtns: bad magic");
  std::uint32_t rank = detail::get_u32(is);
  if (rank > 8) throw IOError("dtns: implausible rank");
  std::vector<int> shape(rank);
  std::int64_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = int(detail::get_u32(is));
    if (shape[i] <= 0) throw IOError("dtns: non-positive extent");
    n *= shape[i];
  }
  Tensor<float> t(shape);
  for (std::int64_t i = 0; i < n; ++i) {
    t.data[std::size_t(i)] = detail::bits_f32(detail::get_u32(is));
    if (!is) throw IOError("dtns: truncated payload");
  }
  return t;
}

inline Tensor<float> load_dtns(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("dtns: cannot open: " + path);
  return load_dtns(f);
}

}  // namespace depthadv

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Binary PPM (P6) and PGM (P5) with 8-bit samples. Images are stored as
// planar [3,H,W] float tensors in [0,1]; label maps as byte vectors.

namespace detail {

inline unsigned char to_byte(float v) {
  long q = std::lround(double(v) * 255.0);
  if (q < 0) q = 0;
  if (q > 255) q = 255;
  return static_cast<unsigned char>(q);
}

inline void skip_pnm_space(std::istream& is) {
  for (;;) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      is.get();
    } else {
      return;
    }
  }
}

inline int read_pnm_int(std::istream& is) {
  skip_pnm_space(is);
  int v = -1;
  is >> v;
  if (!is || v < 0) throw IOError("pnm: malformed header");
  return v;
}

}  // namespace detail

inline void write_ppm(const std::string& path, const Tensor<float>& img,
                      const std::string& comment = "") {
  if (img.rank() != 3 || img.shape[0] != 3) throw ShapeError("write_ppm: expected [3,H,W]");
  const int h = img.shape[1], w = img.shape[2];
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IOError("write_ppm: cannot open " + path);
  f << "P6\n";
  if (!comment.empty()) f << "# " << comment << "\n";
  f << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(std::size_t(w) * 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c)
        row[std::size_t(j) * 3 + c] = detail::to_byte(img.data[(std::size_t(c) * h + i) * w + j]);
    f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
  if (!f) throw IOError("write_ppm: write failed " + path);
}

inline Tensor<float> read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("read_ppm: cannot open " + path);
  std::string magic(2, '\0');
  f.read(magic.data(), 2);
  if (magic != "P6") throw IOError("read_ppm: not a P6 file");
  const int w = detail::read_pnm_int(f);
  const int h = detail::read_pnm_int(f);
  const int maxval = detail::read_pnm_int(f);
  if (maxval != 255) throw IOError("read_ppm: only maxval 255 supported");
  f.get();  // single whitespace after header
  Tensor<float> img({3, h, w});
  std::vector<unsigned char> row(std::size_t(w) * 3);
  for (int i = 0; i < h; ++i) {
    f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
    if (!f) throw IOError("read_ppm: truncated payload");
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c)
        img.data[(std::size_t(c) * h + i) * w + j] = float(row[std::size_t(j) * 3 + c]) / 255.0f;
  }
  return img;
}

inline void write_pgm(const std::string& path, const std::vector<unsigned char>& bytes, int h,
                      int w, const std::string& comment = "") {
  if (bytes.size() != std::size_t(h) * w) throw ShapeError("write_pgm: size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IOError("write_pgm: cannot open " + path);
  f << "P5\n";
  if (!comment.empty()) f << "# " << comment << "\n";
  f << w << " " << h << "\n255\n";
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw IOError("write_pgm: write failed " + path);
}

inline std::vector<unsigned char> read_pgm(const std::string& path, int& h, int& w) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("read_pgm: cannot open " + path);
  std::string magic(2, '\0');
  f.read(magic.data(), 2);
  if (magic != "P5") throw IOError("read_pgm: not a P5 file");
  w = detail::read_pnm_int(f);
  h = detail::read_pnm_int(f);
  const int maxval = detail::read_pnm_int(f);
  if (maxval != 255) throw IOError("read_pgm: only maxval 255 supported");
  f.get();
  std::vector<unsigned char> bytes(std::size_t(h) * w);
  f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw IOError("read_pgm: truncated payload");
  return bytes;
}

// Depth visualization: inverse depth mapped linearly onto 0..255
// (nearest = bright), the usual disparity rendering.
inline std::vector<unsigned char> depth_to_disparity_bytes(const Tensor<float>& depth, float d_min,
                                                           float d_max) {
  if (depth.rank() != 3 || depth.shape[0] != 1)
    throw ShapeError("depth_to_disparity_bytes: expected [1,H,W]");
  const double lo = 1.0 / double(d_max), hi = 1.0 / double(d_min);
  std::vector<unsigned char> out(depth.data.size());
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    double inv = 1.0 / std::max(double(depth.data[i]), 1e-6);
    double t = (inv - lo) / (hi - lo);
    out[i] = detail::to_byte(float(t));
  }
  return out;
}

// Perturbation visualization: v amplified by `gain` and centered at
// mid-gray; gain is recorded in the file comment.
inline void write_perturbation_ppm(const std::string& path, const Tensor<float>& v, float gain) {
  Tensor<float> vis(v.shape);
  for (std::size_t i = 0; i < v.data.size(); ++i) vis.data[i] = 0.5f + gain * v.data[i];
  write_ppm(path, vis, "perturbation amplified x" + std::to_string(gain) + ", centered at 0.5");
}

}  // namespace depthadv

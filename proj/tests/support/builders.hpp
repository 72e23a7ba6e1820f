// Small fixtures shared by the unit and acceptance tests.
#pragma once

#include "dynavessel/volume.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace dvtest {

inline dv::VolumeGeometry cube(int n, double spacing = 1.0) {
  return dv::VolumeGeometry({n, n, n}, dv::Vec3::Constant(spacing));
}

inline dv::LabelVolume random_mask(const dv::VolumeGeometry& g, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution on(p);
  dv::LabelVolume m(g);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = on(rng) ? 1 : 0;
  return m;
}

inline dv::ScalarVolume random_volume(const dv::VolumeGeometry& g, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  dv::ScalarVolume v(g);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(u(rng));
  return v;
}

/// Hand-assembled single-file NIfTI-1 with an int16 payload and scaling.
inline std::vector<std::uint8_t> int16_nifti(std::int16_t raw, float slope, float inter) {
  std::vector<std::uint8_t> b(352 + 2, 0);
  auto put = [&](std::size_t off, const void* src, std::size_t n) { std::memcpy(b.data() + off, src, n); };
  const std::int32_t sizeof_hdr = 348;
  put(0, &sizeof_hdr, 4);
  const std::int16_t dim[8] = {3, 1, 1, 1, 1, 1, 1, 1};
  put(40, dim, sizeof(dim));
  const std::int16_t datatype = 4, bitpix = 16;
  put(70, &datatype, 2);
  put(72, &bitpix, 2);
  const float pixdim[8] = {1, 1, 1, 1, 1, 1, 1, 1};
  put(76, pixdim, sizeof(pixdim));
  const float vox_offset = 352;
  put(108, &vox_offset, 4);
  put(112, &slope, 4);
  put(116, &inter, 4);
  put(344, "n+1\0", 4);
  put(352, &raw, 2);
  return b;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dvtest_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace dvtest

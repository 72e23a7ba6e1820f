#include "dynavessel/imaging.hpp"

#include "dynavessel/error.hpp"
#include "dynavessel/parallel.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace dv {

VolumeGeometry isotropic_geometry(const VolumeGeometry& g, double target_spacing) {
  if (!(target_spacing > 0.0) || !std::isfinite(target_spacing))
    fail(ErrorCode::Argument, "target spacing must be positive");
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    const double extent = g.dims[a] * g.spacing[a] / target_spacing;
    dims[a] = std::max(1, static_cast<int>(std::floor(extent + 0.5)));
  }
  return VolumeGeometry(dims, Vec3::Constant(target_spacing), g.origin, g.direction);
}

ScalarVolume resample_to(const ScalarVolume& vol, const VolumeGeometry& target, float fill) {
  ScalarVolume out(target);
  const auto& src = vol.geometry();
  // voxel(target) -> voxel(source) is affine; step along x incrementally
  const Mat3 m = (src.direction * src.spacing.asDiagonal()).inverse() * target.direction *
                 target.spacing.asDiagonal();
  const Vec3 o = src.world_to_voxel(target.origin);
  const int nx = target.dims[0], ny = target.dims[1];
  parallel_for(target.dims[2], [&](std::ptrdiff_t k) {
    for (int j = 0; j < ny; ++j) {
      const Vec3 row = o + m * Vec3(0, j, static_cast<double>(k));
      float* dst = &out[target.linear(0, j, static_cast<int>(k))];
      for (int i = 0; i < nx; ++i) dst[i] = trilinear_sample_voxel(vol, row + m.col(0) * i, fill);
    }
  });
  return out;
}

ScalarVolume resample_isotropic(const ScalarVolume& vol, double target_spacing) {
  return resample_to(vol, isotropic_geometry(vol.geometry(), target_spacing));
}

LabelVolume resample_labels_to(const LabelVolume& vol, const VolumeGeometry& target) {
  LabelVolume out(target, vol.label_names());
  parallel_for(target.dims[2], [&](std::ptrdiff_t k) {
    for (int j = 0; j < target.dims[1]; ++j)
      for (int i = 0; i < target.dims[0]; ++i)
        out.at(i, j, static_cast<int>(k)) =
            nearest_sample(vol, target.voxel_to_world(Vec3(i, j, static_cast<double>(k))));
  });
  return out;
}

ScalarVolume apply_mask(const ScalarVolume& vol, const LabelVolume& mask, float fill) {
  if (vol.geometry().dims != mask.geometry().dims)
    fail(ErrorCode::Geometry, "mask dimensions differ from volume dimensions");
  ScalarVolume out = vol;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask[i]) out[i] = fill;
  return out;
}

Axis parse_axis(const std::string& name) {
  if (name == "x" || name == "X") return Axis::X;
  if (name == "y" || name == "Y") return Axis::Y;
  if (name == "z" || name == "Z") return Axis::Z;
  fail(ErrorCode::Argument, "axis must be x, y or z");
}

Image2D mip_render(const ScalarVolume& vol, Axis axis, double lo, double hi) {
  if (!(lo < hi)) fail(ErrorCode::Argument, "render window requires lo < hi");
  const auto& g = vol.geometry();
  const int ax = static_cast<int>(axis);
  // image columns/rows are the two remaining axes in increasing order
  const int u = ax == 0 ? 1 : 0;
  const int v = ax == 2 ? 1 : 2;
  Image2D img;
  img.width = g.dims[u];
  img.height = g.dims[v];
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  std::vector<float> maxima(img.pixels.size(), -std::numeric_limits<float>::infinity());
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const int c[3] = {i, j, k};
        const std::size_t p = static_cast<std::size_t>(c[v]) * img.width + c[u];
        maxima[p] = std::max(maxima[p], vol.at(i, j, k));
      }
  for (std::size_t p = 0; p < maxima.size(); ++p) {
    const double t = (maxima[p] - lo) / (hi - lo);
    const double clamped = std::clamp(t, 0.0, 1.0);
    img.pixels[p] = static_cast<std::uint8_t>(std::lround(clamped * 255.0));
  }
  return img;
}

void write_png(const Image2D& image, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) fail(ErrorCode::Io, "cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorCode::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::Io, "PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  // flip rows so +y points up in the picture
  for (int y = image.height - 1; y >= 0; --y)
    png_write_row(png, const_cast<png_bytep>(&image.pixels[static_cast<std::size_t>(y) * image.width]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

std::vector<double> gaussian_kernel(double sigma_vox) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
  std::vector<double> w(2 * radius + 1);
  double sum = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    w[d + radius] = std::exp(-0.5 * d * d / (sigma_vox * sigma_vox));
    sum += w[d + radius];
  }
  for (auto& x : w) x /= sum;
  return w;
}

void convolve_axis(const std::vector<float>& in, std::vector<float>& out, const VolumeGeometry& g, int axis,
                   const std::vector<double>& w) {
  const int radius = static_cast<int>(w.size() / 2);
  const int n = g.dims[axis];
  const std::ptrdiff_t stride = axis == 0 ? 1 : axis == 1 ? g.dims[0] : static_cast<std::ptrdiff_t>(g.dims[0]) * g.dims[1];
  parallel_for(g.dims[2], [&](std::ptrdiff_t k) {
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const int c[3] = {i, j, static_cast<int>(k)};
        const std::size_t idx = g.linear(i, j, static_cast<int>(k));
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          const int p = std::clamp(c[axis] + d, 0, n - 1);
          acc += w[d + radius] * in[idx + (p - c[axis]) * stride];
        }
        out[idx] = static_cast<float>(acc);
      }
  });
}

}  // namespace

ScalarVolume gaussian_smooth(const ScalarVolume& vol, double sigma_mm) {
  if (!(sigma_mm > 0.0)) return vol;
  const auto& g = vol.geometry();
  std::vector<float> a = vol.data();
  std::vector<float> b(a.size());
  for (int axis = 0; axis < 3; ++axis) {
    const double sigma_vox = sigma_mm / g.spacing[axis];
    if (g.dims[axis] == 1 || sigma_vox < 0.1) continue;
    convolve_axis(a, b, g, axis, gaussian_kernel(sigma_vox));
    a.swap(b);
  }
  return ScalarVolume(g, std::move(a));
}

ScalarVolume downsample(const ScalarVolume& vol, int factor) {
  if (factor <= 1) return vol;
  const auto& g = vol.geometry();
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = std::max(1, (g.dims[a] + factor - 1) / factor);
  const Vec3 spacing = g.spacing * factor;
  const Vec3 origin = g.voxel_to_world(Vec3::Constant(0.5 * (factor - 1)));
  ScalarVolume out(VolumeGeometry(dims, spacing, origin, g.direction));
  parallel_for(dims[2], [&](std::ptrdiff_t kk) {
    const int k = static_cast<int>(kk);
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        double acc = 0.0;
        int count = 0;
        for (int z = k * factor; z < std::min(g.dims[2], (k + 1) * factor); ++z)
          for (int y = j * factor; y < std::min(g.dims[1], (j + 1) * factor); ++y)
            for (int x = i * factor; x < std::min(g.dims[0], (i + 1) * factor); ++x) {
              acc += vol.at(x, y, z);
              ++count;
            }
        out.at(i, j, k) = static_cast<float>(acc / count);
      }
  });
  return out;
}

LabelVolume threshold_above(const ScalarVolume& vol, float threshold) {
  LabelVolume out(vol.geometry(), {{0, "background"}, {1, "foreground"}});
  for (std::size_t i = 0; i < vol.size(); ++i) out[i] = vol[i] > threshold ? 1 : 0;
  return out;
}

}  // namespace dv

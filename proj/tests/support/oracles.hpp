// Slow reference implementations used as test oracles. Written directly from
// the metric and threshold definitions, sharing no code with the library.
#pragma once

#include "dynavessel/segmentation.hpp"
#include "dynavessel/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

namespace dvtest::oracle {

inline double mdc(const dv::LabelVolume& gt, const dv::LabelVolume& pred) {
  std::size_t a = 0, both = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt[i]) continue;
    ++a;
    if (pred[i]) ++both;
  }
  return static_cast<double>(both) / static_cast<double>(a);
}

inline double tsens(const std::vector<dv::Index3>& centerline, const dv::LabelVolume& pred) {
  std::size_t hit = 0;
  for (const auto& v : centerline) hit += pred.at(v.i, v.j, v.k) != 0;
  return static_cast<double>(hit) / static_cast<double>(centerline.size());
}

inline std::vector<dv::Index3> surface(const dv::LabelVolume& m) {
  const auto& d = m.geometry().dims;
  std::vector<dv::Index3> out;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!m.at(i, j, k)) continue;
        const int nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k}, {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
        bool border = false;
        for (const auto& n : nb) {
          const bool inside = n[0] >= 0 && n[1] >= 0 && n[2] >= 0 && n[0] < d[0] && n[1] < d[1] && n[2] < d[2];
          if (!inside || !m.at(n[0], n[1], n[2])) border = true;
        }
        if (border) out.push_back({i, j, k});
      }
  return out;
}

/// Mean over `a` of the distance to the nearest point of `p`, all pairs.
inline double adhd(const std::vector<dv::Index3>& a, const std::vector<dv::Index3>& p, const dv::Vec3& spacing) {
  double total = 0.0;
  for (const auto& x : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : p) {
      const double dx = (x.i - y.i) * spacing.x(), dy = (x.j - y.j) * spacing.y(), dz = (x.k - y.k) * spacing.z();
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(a.size());
}

/// Min-max normalization to integer levels, rounding half up.
inline std::vector<std::int64_t> levels(const dv::ScalarVolume& v, const dv::LabelVolume* roi) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!roi || (*roi)[i]) {
      lo = std::min(lo, double(v[i]));
      hi = std::max(hi, double(v[i]));
    }
  std::vector<std::int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double t = (double(v[i]) - lo) / (hi - lo);
    t = std::min(1.0, std::max(0.0, t));
    out[i] = static_cast<std::int64_t>(std::floor(t * dv::kNormLevels + 0.5));
  }
  return out;
}

/// Per-voxel window scan: every voxel sums its own clipped cube.
inline dv::LabelVolume phansalkar(const dv::ScalarVolume& v, const dv::PhansalkarParams& p,
                                  const dv::LabelVolume* roi = nullptr) {
  const auto& g = v.geometry();
  const auto& d = g.dims;
  const auto lv = levels(v, roi);
  const double scale = static_cast<double>(dv::kNormLevels);
  dv::LabelVolume out(g);
  const int r = p.window_radius;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const std::size_t idx = g.linear(i, j, k);
        if (roi && !(*roi)[idx]) continue;
        std::int64_t s = 0, s2 = 0, n = 0;
        for (int z = std::max(0, k - r); z <= std::min(d[2] - 1, k + r); ++z)
          for (int y = std::max(0, j - r); y <= std::min(d[1] - 1, j + r); ++y)
            for (int x = std::max(0, i - r); x <= std::min(d[0] - 1, i + r); ++x) {
              const std::int64_t l = lv[g.linear(x, y, z)];
              s += l;
              s2 += l * l;
              ++n;
            }
        const double mean = double(s) / double(n) / scale;
        const double var = double(s2) / double(n) / (scale * scale) - mean * mean;
        const double sd = std::sqrt(std::max(var, 0.0));
        const double t = mean * (1.0 + p.p * std::exp(-p.q * mean) + p.k * (sd / p.r - 1.0));
        out[idx] = double(lv[idx]) / scale > t ? 1 : 0;
      }
  return out;
}

struct KapurScan {
  int edge = 0;
  double lo = 0, hi = 0;
};

/// Scores every bin edge from scratch (no running sums) and keeps the first maximum.
inline KapurScan kapur(const dv::ScalarVolume& v, int bins, double alpha, const dv::LabelVolume* roi = nullptr) {
  KapurScan res;
  res.lo = std::numeric_limits<double>::infinity();
  res.hi = -res.lo;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!roi || (*roi)[i]) {
      res.lo = std::min(res.lo, double(v[i]));
      res.hi = std::max(res.hi, double(v[i]));
    }
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  double n = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!roi || (*roi)[i]) {
      int b = static_cast<int>(std::floor((double(v[i]) - res.lo) / (res.hi - res.lo) * bins));
      b = std::min(bins - 1, std::max(0, b));
      h[static_cast<std::size_t>(b)] += 1;
      n += 1;
    }
  auto entropy = [&](int from, int to) {
    double mass = 0;
    for (int b = from; b < to; ++b) mass += h[b] / n;
    double e = 0;
    if (std::abs(alpha - 1.0) < 1e-12) {
      for (int b = from; b < to; ++b)
        if (h[b] > 0) {
          const double q = (h[b] / n) / mass;
          e -= q * std::log(q);
        }
    } else {
      double s = 0;
      for (int b = from; b < to; ++b)
        if (h[b] > 0) s += std::pow((h[b] / n) / mass, alpha);
      e = std::log(s) / (1.0 - alpha);
    }
    return e;
  };
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> score(static_cast<std::size_t>(bins), best);
  for (int k = 1; k < bins; ++k) {
    double below = 0, above = 0;
    for (int b = 0; b < k; ++b) below += h[b];
    for (int b = k; b < bins; ++b) above += h[b];
    if (below == 0 || above == 0) continue;
    score[k] = entropy(0, k) + entropy(k, bins);
    best = std::max(best, score[k]);
  }
  for (int k = 1; k < bins; ++k)
    if (score[k] >= best - 1e-9 * std::max(1.0, std::abs(best))) {
      res.edge = k;
      break;
    }
  return res;
}

/// Components of the foreground (26-adjacency) by flood fill.
inline int components26(const dv::LabelVolume& m) {
  const auto& d = m.geometry().dims;
  std::vector<char> seen(m.size(), 0);
  int count = 0;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (!m[s] || seen[s]) continue;
    ++count;
    std::deque<std::size_t> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      const dv::Index3 c = m.geometry().unravel(q.front());
      q.pop_front();
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = c.i + dx, y = c.j + dy, z = c.k + dz;
            if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) continue;
            const std::size_t n = m.geometry().linear(x, y, z);
            if (m[n] && !seen[n]) {
              seen[n] = 1;
              q.push_back(n);
            }
          }
    }
  }
  return count;
}

/// Euler characteristic of the union of closed unit cubes on the foreground.
inline long euler_characteristic(const dv::LabelVolume& m) {
  const auto& d = m.geometry().dims;
  const int X = d[0] + 1, Y = d[1] + 1, Z = d[2] + 1;
  // cells of the cubical complex indexed on a doubled lattice
  const long nx = 2L * X - 1, ny = 2L * Y - 1, nz = 2L * Z - 1;
  std::vector<char> cell(static_cast<std::size_t>(nx * ny * nz), 0);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!m.at(i, j, k)) continue;
        for (int c = 0; c <= 2; ++c)
          for (int b = 0; b <= 2; ++b)
            for (int a = 0; a <= 2; ++a)
              cell[static_cast<std::size_t>(((2L * k + c) * ny + (2L * j + b)) * nx + (2L * i + a))] = 1;
      }
  long chi = 0;
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long x = 0; x < nx; ++x) {
        if (!cell[static_cast<std::size_t>((z * ny + y) * nx + x)]) continue;
        const int dim = int(x & 1) + int(y & 1) + int(z & 1);
        chi += (dim % 2 == 0) ? 1 : -1;
      }
  return chi;
}

/// Enclosed background cavities (6-adjacency, grid border counts as outside).
inline int cavities(const dv::LabelVolume& m) {
  const auto& d = m.geometry().dims;
  const dv::VolumeGeometry pg({d[0] + 2, d[1] + 2, d[2] + 2}, dv::Vec3::Ones());
  dv::LabelVolume bg(pg);
  for (int k = 0; k < pg.dims[2]; ++k)
    for (int j = 0; j < pg.dims[1]; ++j)
      for (int i = 0; i < pg.dims[0]; ++i) {
        const bool inside = i > 0 && j > 0 && k > 0 && i <= d[0] && j <= d[1] && k <= d[2];
        bg.at(i, j, k) = !(inside && m.at(i - 1, j - 1, k - 1));
      }
  std::vector<char> seen(bg.size(), 0);
  int count = 0;
  for (std::size_t s = 0; s < bg.size(); ++s) {
    if (!bg[s] || seen[s]) continue;
    ++count;
    std::deque<std::size_t> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      const dv::Index3 c = pg.unravel(q.front());
      q.pop_front();
      const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
      for (const auto& o : nb) {
        const int x = c.i + o[0], y = c.j + o[1], z = c.k + o[2];
        if (!pg.contains(x, y, z)) continue;
        const std::size_t n = pg.linear(x, y, z);
        if (bg[n] && !seen[n]) {
          seen[n] = 1;
          q.push_back(n);
        }
      }
    }
  }
  return count - 1;  // the outside component
}

/// Independent cycles: b1 = b0 + b2 - chi.
inline long cycles(const dv::LabelVolume& m) { return components26(m) + cavities(m) - euler_characteristic(m); }

}  // namespace dvtest::oracle

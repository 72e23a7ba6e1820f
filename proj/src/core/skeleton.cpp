#include "dynavessel/parallel.hpp"
#include "dynavessel/segmentation.hpp"

#include <array>
#include <cstdlib>
#include <vector>

namespace dv {

namespace {

struct NeighbourTables {
  // adjacency within the 3x3x3 cube, centre excluded
  std::array<std::vector<int>, 27> adj26;
  std::array<std::vector<int>, 27> adj6;
  std::array<bool, 27> in18{};
  std::array<int, 6> faces{};

  NeighbourTables() {
    auto coord = [](int n) { return std::array<int, 3>{n % 3, (n / 3) % 3, n / 9}; };
    int f = 0;
    for (int a = 0; a < 27; ++a) {
      const auto ca = coord(a);
      const int da = std::abs(ca[0] - 1) + std::abs(ca[1] - 1) + std::abs(ca[2] - 1);
      in18[a] = a != 13 && da <= 2;
      if (da == 1) faces[f++] = a;
      for (int b = 0; b < 27; ++b) {
        if (a == b || a == 13 || b == 13) continue;
        const auto cb = coord(b);
        const int dx = std::abs(ca[0] - cb[0]), dy = std::abs(ca[1] - cb[1]), dz = std::abs(ca[2] - cb[2]);
        if (dx > 1 || dy > 1 || dz > 1) continue;
        adj26[a].push_back(b);
        if (dx + dy + dz == 1) adj6[a].push_back(b);
      }
    }
  }
};

const NeighbourTables& tables() {
  static const NeighbourTables t;
  return t;
}

}  // namespace

bool is_simple_point(const std::uint8_t (&nbh)[27]) {
  const auto& t = tables();
  // foreground: exactly one 26-component in N26
  int seen = 0;
  int fg_components = 0;
  int stack[27];
  for (int s = 0; s < 27; ++s) {
    if (s == 13 || !nbh[s] || (seen >> s & 1)) continue;
    if (++fg_components > 1) return false;
    int top = 0;
    stack[top++] = s;
    seen |= 1 << s;
    while (top) {
      const int cur = stack[--top];
      for (int n : t.adj26[cur])
        if (nbh[n] && !(seen >> n & 1)) {
          seen |= 1 << n;
          stack[top++] = n;
        }
    }
  }
  if (fg_components != 1) return false;
  // background: exactly one 6-component in N18 touching a face neighbour
  seen = 0;
  int bg_components = 0;
  for (int s : t.faces) {
    if (nbh[s] || (seen >> s & 1)) continue;
    if (++bg_components > 1) return false;
    int top = 0;
    stack[top++] = s;
    seen |= 1 << s;
    while (top) {
      const int cur = stack[--top];
      for (int n : t.adj6[cur])
        if (t.in18[n] && !nbh[n] && !(seen >> n & 1)) {
          seen |= 1 << n;
          stack[top++] = n;
        }
    }
  }
  return bg_components == 1;
}

namespace {

void gather(const std::vector<std::uint8_t>& img, const VolumeGeometry& g, const Index3& v, std::uint8_t (&nbh)[27]) {
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int i = v.i + dx, j = v.j + dy, k = v.k + dz;
        nbh[(dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)] = g.contains(i, j, k) ? img[g.linear(i, j, k)] : 0;
      }
}

bool deletable(const std::uint8_t (&nbh)[27]) {
  int n = 0;
  for (int s = 0; s < 27; ++s) n += s != 13 && nbh[s];
  if (n <= 1) return false;  // isolated or curve end
  return is_simple_point(nbh);
}

}  // namespace

VoxelSet skeletonize(const LabelVolume& mask) {
  const auto& g = mask.geometry();
  std::vector<std::uint8_t> img(mask.size());
  std::vector<Index3> active;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    img[i] = mask[i] ? 1 : 0;
    if (img[i]) active.push_back(g.unravel(i));
  }
  static constexpr int kDir[6][3] = {{0, 0, 1}, {0, 0, -1}, {0, 1, 0}, {0, -1, 0}, {1, 0, 0}, {-1, 0, 0}};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& d : kDir) {
      std::vector<std::uint8_t> flag(active.size(), 0);
      parallel_for(static_cast<std::ptrdiff_t>(active.size()), [&](std::ptrdiff_t a) {
        const Index3& v = active[static_cast<std::size_t>(a)];
        const int i = v.i + d[0], j = v.j + d[1], k = v.k + d[2];
        if (g.contains(i, j, k) && img[g.linear(i, j, k)]) return;
        std::uint8_t nbh[27];
        gather(img, g, v, nbh);
        flag[static_cast<std::size_t>(a)] = deletable(nbh);
      });
      // sequential re-check keeps each deletion topology-preserving
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (!flag[a]) continue;
        std::uint8_t nbh[27];
        gather(img, g, active[a], nbh);
        if (!deletable(nbh)) continue;
        img[g.linear(active[a])] = 0;
        changed = true;
      }
      std::vector<Index3> next;
      next.reserve(active.size());
      for (const auto& v : active)
        if (img[g.linear(v)]) next.push_back(v);
      active.swap(next);
    }
  }
  VoxelSet out;
  out.geometry = g;
  out.indices = std::move(active);
  return out;
}

}  // namespace dv

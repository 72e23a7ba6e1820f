#include "dynavessel/error.hpp"
#include "dynavessel/parallel.hpp"
#include "dynavessel/segmentation.hpp"

#include <string>
#include <vector>

namespace dv {

Connectivity parse_connectivity(int n) {
  if (n == 6) return Connectivity::Six;
  if (n == 26) return Connectivity::TwentySix;
  fail(ErrorCode::Argument, "connectivity must be 6 or 26, got " + std::to_string(n));
}

LabelVolume Components::to_labels() const {
  if (count() > 255) fail(ErrorCode::Argument, "more than 255 components do not fit in a label volume");
  LabelVolume out(geometry);
  LabelNames names{{0, "background"}};
  for (std::size_t c = 1; c <= count(); ++c) names[static_cast<std::uint8_t>(c)] = "component_" + std::to_string(c);
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = static_cast<std::uint8_t>(ids[i]);
  out.set_label_names(std::move(names));
  return out;
}

namespace {

std::vector<std::array<int, 3>> neighbour_offsets(Connectivity c) {
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int m = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (m == 0) continue;
        if (c == Connectivity::Six && m != 1) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

}  // namespace

Components connected_components(const LabelVolume& mask, Connectivity connectivity) {
  const auto& g = mask.geometry();
  Components res;
  res.geometry = g;
  res.ids.assign(mask.size(), 0);
  const auto offsets = neighbour_offsets(connectivity);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || res.ids[seed]) continue;
    const auto id = static_cast<std::int32_t>(res.sizes.size() + 1);
    std::size_t size = 0;
    res.ids[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++size;
      const Index3 v = g.unravel(cur);
      for (const auto& o : offsets) {
        const int i = v.i + o[0], j = v.j + o[1], k = v.k + o[2];
        if (!g.contains(i, j, k)) continue;
        const std::size_t n = g.linear(i, j, k);
        if (!mask[n] || res.ids[n]) continue;
        res.ids[n] = id;
        stack.push_back(n);
      }
    }
    res.sizes.push_back(size);
  }
  return res;
}

LabelVolume remove_small_components(const LabelVolume& mask, Connectivity connectivity, std::size_t min_voxels) {
  const Components comps = connected_components(mask, connectivity);
  LabelVolume out(mask.geometry(), {{0, "background"}, {1, "vessel"}});
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto id = comps.ids[i];
    out[i] = id > 0 && comps.sizes[static_cast<std::size_t>(id - 1)] >= min_voxels ? 1 : 0;
  }
  return out;
}

VoxelSet extract_surface(const LabelVolume& mask) {
  const auto& g = mask.geometry();
  std::vector<std::vector<Index3>> per_slice(static_cast<std::size_t>(g.dims[2]));
  static constexpr int kOff[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  parallel_for(g.dims[2], [&](std::ptrdiff_t kk) {
    const int k = static_cast<int>(kk);
    auto& out = per_slice[static_cast<std::size_t>(k)];
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        if (!mask.at(i, j, k)) continue;
        for (const auto& o : kOff) {
          const int a = i + o[0], b = j + o[1], c = k + o[2];
          if (!g.contains(a, b, c) || !mask.at(a, b, c)) {
            out.push_back({i, j, k});
            break;
          }
        }
      }
  });
  VoxelSet set;
  set.geometry = g;
  for (auto& s : per_slice) set.indices.insert(set.indices.end(), s.begin(), s.end());
  return set;
}

}  // namespace dv

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <vector>

#include "tensor.hpp"

namespace msmp {

// Directed k-nearest-neighbor graph on a periodic 1D grid. Edge (src j, dst i)
// carries information from j into i's aggregation. Immutable after build.
struct GraphTopology {
  int64_t n_nodes = 0;
  double length = 0.0;                     // domain length L
  std::vector<double> x;                   // node coordinates, uniform on [0, L)
  std::shared_ptr<std::vector<int32_t>> src;  // shared so tapes can alias them
  std::shared_ptr<std::vector<int32_t>> dst;

  int64_t n_edges() const { return src ? static_cast<int64_t>(src->size()) : 0; }

  // Relative position x_i - x_j under the minimal-image convention, so the
  // wraparound pair (0, n-1) reports +dx rather than -(L - dx).
  double rel_pos(int64_t i, int64_t j) const {
    double d = x[static_cast<size_t>(i)] - x[static_cast<size_t>(j)];
    if (d > 0.5 * length) d -= length;
    if (d < -0.5 * length) d += length;
    return d;
  }
};

// Connects the k nearest neighbors on each side of every node, wrapping
// periodically. Edges are emitted sorted by (dst, src).
inline GraphTopology build_graph(int64_t n_x, double length, int64_t k_per_side = 3) {
  check(n_x > 2 * k_per_side,
        "build_graph: need n_x > 2k, got n_x=" + std::to_string(n_x) +
            " k=" + std::to_string(k_per_side));
  GraphTopology g;
  g.n_nodes = n_x;
  g.length = length;
  g.x.resize(static_cast<size_t>(n_x));
  for (int64_t i = 0; i < n_x; ++i) g.x[static_cast<size_t>(i)] = length * i / n_x;
  g.src = std::make_shared<std::vector<int32_t>>();
  g.dst = std::make_shared<std::vector<int32_t>>();
  g.src->reserve(static_cast<size_t>(2 * k_per_side * n_x));
  g.dst->reserve(static_cast<size_t>(2 * k_per_side * n_x));
  for (int64_t i = 0; i < n_x; ++i) {
    std::vector<int32_t> nb;
    for (int64_t o = 1; o <= k_per_side; ++o) {
      nb.push_back(static_cast<int32_t>((i + o) % n_x));
      nb.push_back(static_cast<int32_t>((i - o + n_x) % n_x));
    }
    std::sort(nb.begin(), nb.end());
    for (int32_t j : nb) {
      g.src->push_back(j);
      g.dst->push_back(static_cast<int32_t>(i));
    }
  }
  return g;
}

}  // namespace msmp

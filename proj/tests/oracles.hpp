#pragma once

// Brute-force planar oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cstdlib>
#include <utility>
#include <vector>

#include "cgff/renorm.hpp"

namespace cgff::oracle {

// Fixpoint sweeps of the reachable bad set; no queue.
inline bool star_reachable(const PlanarGrid& g, int64_t m, int64_t nn) {
  const int64_t s = g.side();
  std::vector<uint8_t> reach(size_t(s * s), 0);
  auto id = [&](int64_t i, int64_t j) { return size_t((i + g.half) * s + (j + g.half)); };
  for (int64_t i = -m; i <= m; ++i)
    for (int64_t j = -m; j <= m; ++j) reach[id(i, j)] = g.at(i, j) != 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (int64_t i = -nn; i <= nn; ++i)
      for (int64_t j = -nn; j <= nn; ++j) {
        if (reach[id(i, j)] || !g.at(i, j)) continue;
        for (int64_t di = -1; di <= 1; ++di)
          for (int64_t dj = -1; dj <= 1; ++dj) {
            const int64_t a = i + di, b = j + dj;
            if (std::max(std::abs(a), std::abs(b)) <= nn && reach[id(a, b)] && !reach[id(i, j)]) {
              reach[id(i, j)] = 1;
              changed = true;
            }
          }
      }
  }
  for (int64_t i = -nn; i <= nn; ++i)
    for (int64_t j = -nn; j <= nn; ++j)
      if (std::max(std::abs(i), std::abs(j)) == nn && reach[id(i, j)]) return true;
  return false;
}

// A bad *-component of the annulus surrounds the m-box iff the origin cannot
// reach the sphere |.| = nn by nearest-neighbour steps avoiding it.
inline bool surrounding_component(const PlanarGrid& g, int64_t m, int64_t nn) {
  const int64_t s = g.side();
  auto id = [&](int64_t i, int64_t j) { return size_t((i + g.half) * s + (j + g.half)); };
  auto in_annulus = [&](int64_t i, int64_t j) {
    const int64_t r = std::max(std::abs(i), std::abs(j));
    return r > m && r < nn;
  };
  std::vector<int> comp(size_t(s * s), -1);
  int ncomp = 0;
  for (int64_t i = -nn; i <= nn; ++i)
    for (int64_t j = -nn; j <= nn; ++j) {
      if (!in_annulus(i, j) || !g.at(i, j) || comp[id(i, j)] >= 0) continue;
      std::vector<std::pair<int64_t, int64_t>> stack{{i, j}};
      comp[id(i, j)] = ncomp;
      while (!stack.empty()) {
        auto [a, b] = stack.back();
        stack.pop_back();
        for (int64_t da = -1; da <= 1; ++da)
          for (int64_t db = -1; db <= 1; ++db) {
            const int64_t x = a + da, y = b + db;
            if (!in_annulus(x, y) || !g.at(x, y) || comp[id(x, y)] >= 0) continue;
            comp[id(x, y)] = ncomp;
            stack.push_back({x, y});
          }
      }
      ++ncomp;
    }
  for (int c = 0; c < ncomp; ++c) {
    std::vector<uint8_t> seen(size_t(s * s), 0);
    std::vector<std::pair<int64_t, int64_t>> stack{{0, 0}};
    seen[id(0, 0)] = 1;
    bool escaped = false;
    while (!stack.empty() && !escaped) {
      auto [a, b] = stack.back();
      stack.pop_back();
      if (std::max(std::abs(a), std::abs(b)) == nn) escaped = true;
      const int64_t nb[4][2] = {{a + 1, b}, {a - 1, b}, {a, b + 1}, {a, b - 1}};
      for (const auto& q : nb) {
        if (std::max(std::abs(q[0]), std::abs(q[1])) > nn || seen[id(q[0], q[1])] || comp[id(q[0], q[1])] == c) continue;
        seen[id(q[0], q[1])] = 1;
        stack.push_back({q[0], q[1]});
      }
    }
    if (!escaped) return true;
  }
  return false;
}

}  // namespace cgff::oracle

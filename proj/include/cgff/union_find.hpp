#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace cgff {

// Disjoint sets with union by size and path halving.
class UnionFind {
 public:
  explicit UnionFind(int64_t n = 0) { reset(n); }

  void reset(int64_t n) {
    parent_.resize(size_t(n));
    size_.assign(size_t(n), 1);
    std::iota(parent_.begin(), parent_.end(), int64_t(0));
  }

  int64_t find(int64_t x) {
    while (parent_[size_t(x)] != x) {
      parent_[size_t(x)] = parent_[size_t(parent_[size_t(x)])];
      x = parent_[size_t(x)];
    }
    return x;
  }

  // Returns the new root.
  int64_t unite(int64_t a, int64_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[size_t(a)] < size_[size_t(b)]) std::swap(a, b);
    parent_[size_t(b)] = a;
    size_[size_t(a)] += size_[size_t(b)];
    return a;
  }

  bool same(int64_t a, int64_t b) { return find(a) == find(b); }
  int64_t component_size(int64_t x) { return size_[size_t(find(x))]; }
  int64_t size() const { return int64_t(parent_.size()); }

 private:
  std::vector<int64_t> parent_;
  std::vector<int64_t> size_;
};

}  // namespace cgff

#pragma once

// Brute-force reference implementations for the clustering metrics.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "recten/metrics.hpp"
#include "recten/rng.hpp"

namespace oracle {

// (a + b) / C(n, 2) by looking at every pair.
inline double rand_index(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++total;
      agree += (x[i] == x[j]) == (y[i] == y[j]);
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

// Tree edit distance as the cheapest Tai mapping: enumerate every partial
// one-to-one node map that keeps ancestry and left-to-right order, and charge
// unmapped nodes 1 each plus 1 per mapped pair with different labels.
class TaiMapping {
 public:
  TaiMapping(const recten::LabeledTree& a, const recten::LabeledTree& b) : a_(info(a)), b_(info(b)) {}

  std::size_t distance() {
    best_ = std::numeric_limits<std::size_t>::max();
    used_.assign(b_.size(), false);
    pairs_.clear();
    search(0, 0);
    return best_;
  }

 private:
  struct Node {
    std::string label;
    int pre = 0, post = 0;
  };

  static std::vector<Node> info(const recten::LabeledTree& t) {
    std::vector<Node> out(t.nodes.size());
    int pre = 0, post = 0;
    std::function<void(int)> walk = [&](int n) {
      out[static_cast<std::size_t>(n)].label = t.nodes[static_cast<std::size_t>(n)].label;
      out[static_cast<std::size_t>(n)].pre = pre++;
      for (int c : t.nodes[static_cast<std::size_t>(n)].children) walk(c);
      out[static_cast<std::size_t>(n)].post = post++;
    };
    walk(0);
    return out;
  }

  static bool ancestor(const Node& x, const Node& y) { return x.pre < y.pre && x.post > y.post; }
  static bool left_of(const Node& x, const Node& y) { return x.pre < y.pre && x.post < y.post; }

  bool compatible(std::size_t i, std::size_t j) const {
    for (auto [p, q] : pairs_) {
      const auto &x1 = a_[p], &x2 = a_[i], &y1 = b_[q], &y2 = b_[j];
      if (ancestor(x1, x2) != ancestor(y1, y2) || ancestor(x2, x1) != ancestor(y2, y1)) return false;
      if (left_of(x1, x2) != left_of(y1, y2) || left_of(x2, x1) != left_of(y2, y1)) return false;
    }
    return true;
  }

  void search(std::size_t i, std::size_t relabels) {
    if (i == a_.size()) {
      const std::size_t m = pairs_.size();
      best_ = std::min(best_, (a_.size() - m) + (b_.size() - m) + relabels);
      return;
    }
    search(i + 1, relabels);  // node i unmapped
    for (std::size_t j = 0; j < b_.size(); ++j) {
      if (used_[j] || !compatible(i, j)) continue;
      used_[j] = true;
      pairs_.push_back({i, j});
      search(i + 1, relabels + (a_[i].label != b_[j].label));
      pairs_.pop_back();
      used_[j] = false;
    }
  }

  std::vector<Node> a_, b_;
  std::vector<bool> used_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::size_t best_ = 0;
};

inline std::size_t tree_edit_distance(const recten::LabeledTree& a, const recten::LabeledTree& b) {
  return TaiMapping(a, b).distance();
}

// Random ordered tree with n nodes over labels a..c.
inline recten::LabeledTree random_tree(std::size_t n, recten::Rng& rng) {
  recten::LabeledTree t;
  const char* labels[] = {"a", "b", "c"};
  t.add(labels[rng.below(3)]);
  for (std::size_t k = 1; k < n; ++k) t.add(labels[rng.below(3)], static_cast<int>(rng.below(k)));
  return t;
}

inline std::vector<std::size_t> random_partition(std::size_t n, std::size_t k, recten::Rng& rng) {
  std::vector<std::size_t> p(n);
  for (auto& x : p) x = rng.below(k);
  return p;
}

inline recten::Partition as_partition(const std::vector<std::size_t>& keys) {
  return recten::Partition::from_keys<std::size_t>(keys);
}

}  // namespace oracle

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "recten/recten.hpp"
#include "recten/synthgen.hpp"

namespace recten {

/// Element n belongs to cluster assignment[n]; cluster indices are dense from 0.
struct Partition {
  std::vector<std::size_t> assignment;
  std::size_t cluster_count = 0;

  std::size_t size() const { return assignment.size(); }

  /// Densify arbitrary keys in first-seen order.
  template <class Key>
  static Partition from_keys(std::span<const Key> keys);
};

/// Marker for cells covered by no leaf cluster.
inline constexpr ClusterId kUnclustered = std::numeric_limits<ClusterId>::max();

/// Leaf cluster per cell: the leaf whose strength product at the cell is
/// largest, ties to the smaller id; kUnclustered when no leaf covers the cell.
std::vector<ClusterId> assign_leaves(const ClusterTree& tree, std::span<const Coord> cells);

/// assign_leaves as a partition. The unclustered cells form one class.
Partition hard_assign(const ClusterTree& tree, std::span<const Coord> cells);

/// 1 - mean over non-empty clusters of the fraction of members outside the
/// cluster's majority label. Clusters listed in `skip` are left out of the mean.
/// Throws std::invalid_argument for an empty partition or mismatched sizes.
double total_purity(const Partition& p, std::span<const int> labels, std::span<const std::size_t> skip = {});

/// (a + b) / C(n, 2) from the contingency table. Throws std::invalid_argument
/// when sizes differ or n < 2.
double rand_index(const Partition& p1, const Partition& p2);

/// Ordered rooted tree with a label per node. Node 0 is the root.
struct LabeledTree {
  struct Node {
    std::string label;
    std::vector<int> children;

    friend bool operator==(const Node&, const Node&) = default;
  };
  std::vector<Node> nodes;

  int add(std::string label, int parent = -1);
  /// Sort every child list by label (stable).
  void sort_children_by_label();
  friend bool operator==(const LabeledTree&, const LabeledTree&) = default;
};

/// Unit-cost ordered tree edit distance (Zhang-Shasha).
/// Throws std::invalid_argument when either tree is empty.
std::size_t tree_edit_distance(const LabeledTree& t1, const LabeledTree& t2);

/// The reference tree, children ordered by label.
LabeledTree truth_tree(const GroundTruth& truth);

/// Output tree labeled against the truth. A node at level L is named after
/// the majority level-L truth ancestor of the labeled cells hard-assigned to
/// leaves below it ("unlabeled" if there are none); children are ordered by
/// (label, nnz descending, id).
LabeledTree tree_for_ted(const ClusterTree& tree, const GroundTruth& truth);

struct Evaluation {
  double tp = 0.0;
  double ri = 0.0;
  std::size_t ted = 0;
  /// Cells in the metric universe.
  std::size_t cells = 0;
};

/// TP and RI over the labeled cells (plus `extra_cells`, which are treated as
/// one additional "unlabeled" class). The unclustered class is left out of TP
/// but kept in RI. `ted` is left at 0.
Evaluation evaluate_partition(const ClusterTree& tree, const std::map<Coord, int>& labels,
                              std::span<const Coord> extra_cells = {});

/// evaluate_partition plus TED against the truth tree.
Evaluation evaluate(const ClusterTree& tree, const GroundTruth& truth, std::span<const Coord> extra_cells = {});

template <class Key>
Partition Partition::from_keys(std::span<const Key> keys) {
  Partition p;
  std::map<Key, std::size_t> seen;
  p.assignment.reserve(keys.size());
  for (const auto& k : keys) p.assignment.push_back(seen.emplace(k, seen.size()).first->second);
  p.cluster_count = seen.size();
  return p;
}

}  // namespace recten

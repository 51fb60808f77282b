#include "recten/metrics.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace recten {

namespace {

// Per-mode dense strength lookup for one cluster.
struct StrengthTable {
  ClusterId id = 0;
  std::array<std::unordered_map<Index, double>, 3> mode;

  double at(const Coord& c) const {
    double prod = 1.0;
    for (std::size_t m = 0; m < 3; ++m) {
      auto it = mode[m].find(c[m]);
      if (it == mode[m].end()) return 0.0;
      prod *= it->second;
    }
    return prod;
  }
};

std::uint64_t pairs(std::uint64_t n) { return n * (n - (n > 0)) / 2; }

}  // namespace

std::vector<ClusterId> assign_leaves(const ClusterTree& tree, std::span<const Coord> cells) {
  std::vector<StrengthTable> leaves;
  for (ClusterId id : tree.leaves()) {
    if (id == kRootId) continue;
    StrengthTable s;
    s.id = id;
    const auto& c = tree.nodes.at(id);
    for (std::size_t m = 0; m < 3; ++m)
      for (const auto& e : c.supports[m]) s.mode[m][e.index] = e.strength;
    leaves.push_back(std::move(s));
  }
  // leaves() is id-ordered, so strict > keeps the smaller id on ties.
  std::vector<ClusterId> out;
  out.reserve(cells.size());
  for (const auto& cell : cells) {
    ClusterId best = kUnclustered;
    double best_v = 0.0;
    for (const auto& l : leaves) {
      const double v = l.at(cell);
      if (v > best_v) best_v = v, best = l.id;
    }
    out.push_back(best);
  }
  return out;
}

Partition hard_assign(const ClusterTree& tree, std::span<const Coord> cells) {
  const auto ids = assign_leaves(tree, cells);
  return Partition::from_keys<ClusterId>(ids);
}

double total_purity(const Partition& p, std::span<const int> labels, std::span<const std::size_t> skip) {
  if (p.size() == 0) throw std::invalid_argument("total_purity: empty partition");
  if (labels.size() != p.size()) throw std::invalid_argument("total_purity: label count differs from partition size");
  std::vector<std::map<int, std::size_t>> counts(p.cluster_count);
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (p.assignment[n] >= p.cluster_count) throw std::invalid_argument("total_purity: cluster index out of range");
    ++counts[p.assignment[n]][labels[n]];
  }
  double impurity = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c].empty() || std::find(skip.begin(), skip.end(), c) != skip.end()) continue;
    std::size_t total = 0, majority = 0;
    for (const auto& [label, n] : counts[c]) total += n, majority = std::max(majority, n);
    impurity += static_cast<double>(total - majority) / static_cast<double>(total);
    ++used;
  }
  if (used == 0) return 0.0;  // nothing clustered: no purity to speak of
  return 1.0 - impurity / static_cast<double>(used);
}

double rand_index(const Partition& p1, const Partition& p2) {
  if (p1.size() != p2.size()) throw std::invalid_argument("rand_index: partitions cover different universes");
  const std::uint64_t n = p1.size();
  if (n < 2) throw std::invalid_argument("rand_index: need at least two elements");
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> table;
  std::vector<std::uint64_t> rows(p1.cluster_count, 0), cols(p2.cluster_count, 0);
  for (std::size_t e = 0; e < n; ++e) {
    ++table[{p1.assignment[e], p2.assignment[e]}];
    ++rows.at(p1.assignment[e]);
    ++cols.at(p2.assignment[e]);
  }
  std::uint64_t same_both = 0, same1 = 0, same2 = 0;
  for (const auto& [key, c] : table) same_both += pairs(c);
  for (auto r : rows) same1 += pairs(r);
  for (auto c : cols) same2 += pairs(c);
  const std::uint64_t all = pairs(n);
  const std::uint64_t diff_both = all - same1 - same2 + same_both;
  return static_cast<double>(same_both + diff_both) / static_cast<double>(all);
}

int LabeledTree::add(std::string label, int parent) {
  if (parent < -1 || parent >= static_cast<int>(nodes.size())) throw std::invalid_argument("LabeledTree::add: bad parent");
  if (parent == -1 && !nodes.empty()) throw std::invalid_argument("LabeledTree::add: tree already has a root");
  nodes.push_back({std::move(label), {}});
  const int id = static_cast<int>(nodes.size()) - 1;
  if (parent >= 0) nodes[static_cast<std::size_t>(parent)].children.push_back(id);
  return id;
}

void LabeledTree::sort_children_by_label() {
  for (auto& n : nodes)
    std::stable_sort(n.children.begin(), n.children.end(),
                     [&](int a, int b) { return nodes[static_cast<std::size_t>(a)].label < nodes[static_cast<std::size_t>(b)].label; });
}

namespace {

// Postorder view used by Zhang-Shasha: 1-based postorder numbers, the
// leftmost leaf descendant of every node, and the key roots.
struct Postorder {
  std::vector<const std::string*> label;  // [1..n]
  std::vector<std::size_t> lml;           // [1..n]
  std::vector<std::size_t> keyroots;
};

Postorder postorder(const LabeledTree& t) {
  Postorder p;
  p.label.push_back(nullptr);
  p.lml.push_back(0);
  // Iterative postorder traversal.
  struct Frame {
    int node;
    std::size_t next_child;
    std::size_t leftmost;
  };
  std::vector<Frame> stack{{0, 0, 0}};
  while (!stack.empty()) {
    auto& f = stack.back();
    const auto& kids = t.nodes[static_cast<std::size_t>(f.node)].children;
    if (f.next_child < kids.size()) {
      const int child = kids[f.next_child++];
      stack.push_back({child, 0, 0});
      continue;
    }
    p.label.push_back(&t.nodes[static_cast<std::size_t>(f.node)].label);
    const std::size_t me = p.label.size() - 1;
    const std::size_t left = f.leftmost == 0 ? me : f.leftmost;
    p.lml.push_back(left);
    stack.pop_back();
    if (!stack.empty() && stack.back().leftmost == 0) stack.back().leftmost = left;
  }
  // A key root is the highest node for each distinct leftmost leaf.
  const std::size_t n = p.label.size() - 1;
  std::map<std::size_t, std::size_t> highest;
  for (std::size_t v = 1; v <= n; ++v) highest[p.lml[v]] = v;
  for (const auto& [l, v] : highest) p.keyroots.push_back(v);
  std::sort(p.keyroots.begin(), p.keyroots.end());
  return p;
}

}  // namespace

std::size_t tree_edit_distance(const LabeledTree& t1, const LabeledTree& t2) {
  if (t1.nodes.empty() || t2.nodes.empty()) throw std::invalid_argument("tree_edit_distance: empty tree");
  const Postorder a = postorder(t1), b = postorder(t2);
  const std::size_t n = a.label.size() - 1, m = b.label.size() - 1;
  std::vector<std::size_t> td((n + 1) * (m + 1), 0);
  std::vector<std::size_t> fd((n + 2) * (m + 2), 0);
  auto TD = [&](std::size_t i, std::size_t j) -> std::size_t& { return td[i * (m + 1) + j]; };

  for (std::size_t ki : a.keyroots) {
    for (std::size_t kj : b.keyroots) {
      const std::size_t li = a.lml[ki], lj = b.lml[kj];
      // Forest distance indexed relative to the leftmost leaves; offset 0 is the empty forest.
      const std::size_t rows = ki - li + 2, cols = kj - lj + 2;
      auto FD = [&](std::size_t x, std::size_t y) -> std::size_t& { return fd[x * cols + y]; };
      FD(0, 0) = 0;
      for (std::size_t x = 1; x < rows; ++x) FD(x, 0) = FD(x - 1, 0) + 1;
      for (std::size_t y = 1; y < cols; ++y) FD(0, y) = FD(0, y - 1) + 1;
      for (std::size_t x = 1; x < rows; ++x) {
        const std::size_t i = li + x - 1;
        for (std::size_t y = 1; y < cols; ++y) {
          const std::size_t j = lj + y - 1;
          const std::size_t del = FD(x - 1, y) + 1, ins = FD(x, y - 1) + 1;
          if (a.lml[i] == li && b.lml[j] == lj) {
            const std::size_t ren = FD(x - 1, y - 1) + (*a.label[i] == *b.label[j] ? 0 : 1);
            FD(x, y) = std::min({del, ins, ren});
            TD(i, j) = FD(x, y);
          } else {
            const std::size_t px = a.lml[i] - li, py = b.lml[j] - lj;
            FD(x, y) = std::min({del, ins, FD(px, py) + TD(i, j)});
          }
        }
      }
    }
  }
  return TD(n, m);
}

LabeledTree truth_tree(const GroundTruth& truth) {
  LabeledTree t;
  if (truth.nodes.empty()) return t;
  // Truth nodes are stored parent-before-child.
  std::vector<int> map(truth.nodes.size(), -1);
  for (std::size_t n = 0; n < truth.nodes.size(); ++n) {
    const int parent = truth.nodes[n].parent;
    if (n > 0 && (parent < 0 || parent >= static_cast<int>(n))) throw std::invalid_argument("truth_tree: nodes must follow their parent");
    map[n] = t.add(truth.nodes[n].label, n == 0 ? -1 : map[static_cast<std::size_t>(parent)]);
  }
  t.sort_children_by_label();
  return t;
}

LabeledTree tree_for_ted(const ClusterTree& tree, const GroundTruth& truth) {
  std::vector<Coord> cells;
  std::vector<int> labels;
  for (const auto& [c, l] : truth.labels) cells.push_back(c), labels.push_back(l);
  const auto leaf_of = assign_leaves(tree, cells);

  // Labeled cells per leaf.
  std::map<ClusterId, std::vector<int>> by_leaf;
  for (std::size_t n = 0; n < cells.size(); ++n)
    if (leaf_of[n] != kUnclustered) by_leaf[leaf_of[n]].push_back(labels[n]);

  const std::string root_label = truth.nodes.empty() ? "root" : truth.nodes[0].label;
  std::map<ClusterId, std::string> name;
  // Post-order accumulation of leaf label lists up the tree.
  std::map<ClusterId, std::vector<int>> below;
  std::vector<ClusterId> order;
  std::vector<ClusterId> stack{kRootId};
  while (!stack.empty()) {
    const ClusterId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    for (ClusterId c : tree.children_of(id)) stack.push_back(c);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const ClusterId id = *it;
    auto& mine = below[id];
    if (auto f = by_leaf.find(id); f != by_leaf.end() && tree.is_leaf(id)) mine = f->second;
    for (ClusterId c : tree.children_of(id)) {
      auto& sub = below[c];
      mine.insert(mine.end(), sub.begin(), sub.end());
    }
    if (id == kRootId) {
      name[id] = root_label;
      continue;
    }
    const int level = tree.nodes.at(id).level;
    std::map<int, std::size_t> votes;
    for (int l : mine) ++votes[truth.ancestor_at_level(l, level)];
    int best = -1;
    std::size_t best_n = 0;
    for (const auto& [l, n] : votes)
      if (n > best_n) best = l, best_n = n;  // map order: ties go to the smaller truth id
    name[id] = best < 0 ? "unlabeled" : truth.nodes.at(static_cast<std::size_t>(best)).label;
  }

  LabeledTree out;
  struct Item {
    ClusterId id;
    int parent;
  };
  std::vector<Item> queue{{kRootId, -1}};
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const auto [id, parent] = queue[q];
    const int me = out.add(name[id], parent);
    std::vector<ClusterId> kids = tree.children_of(id);
    std::sort(kids.begin(), kids.end(), [&](ClusterId x, ClusterId y) {
      if (name[x] != name[y]) return name[x] < name[y];
      const auto nx = tree.nodes.at(x).nnz, ny = tree.nodes.at(y).nnz;
      if (nx != ny) return nx > ny;
      return x < y;
    });
    for (ClusterId c : kids) queue.push_back({c, me});
  }
  return out;
}

Evaluation evaluate_partition(const ClusterTree& tree, const std::map<Coord, int>& truth_labels,
                              std::span<const Coord> extra_cells) {
  std::vector<Coord> cells;
  std::vector<int> labels;
  for (const auto& [c, l] : truth_labels) cells.push_back(c), labels.push_back(l);
  for (const auto& c : extra_cells)
    if (!truth_labels.count(c)) cells.push_back(c), labels.push_back(-1);

  Evaluation ev;
  ev.cells = cells.size();
  if (cells.empty()) throw std::invalid_argument("evaluate: no cells to score");
  const auto leaf_of = assign_leaves(tree, cells);
  // Dense cluster indices with the unclustered class pinned to the end.
  std::map<ClusterId, std::size_t> index;
  for (auto id : leaf_of)
    if (id != kUnclustered) index.emplace(id, 0);
  std::size_t next = 0;
  for (auto& [id, n] : index) n = next++;
  Partition pred;
  pred.cluster_count = next + 1;
  for (auto id : leaf_of) pred.assignment.push_back(id == kUnclustered ? next : index[id]);
  const std::size_t skip[] = {next};
  ev.tp = total_purity(pred, labels, skip);
  ev.ri = cells.size() >= 2 ? rand_index(pred, Partition::from_keys<int>(labels)) : 1.0;
  return ev;
}

Evaluation evaluate(const ClusterTree& tree, const GroundTruth& truth, std::span<const Coord> extra_cells) {
  Evaluation ev = evaluate_partition(tree, truth.labels, extra_cells);
  ev.ted = tree_edit_distance(tree_for_ted(tree, truth), truth_tree(truth));
  return ev;
}

}  // namespace recten

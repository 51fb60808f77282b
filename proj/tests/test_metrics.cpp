#include <doctest.h>

#include "oracles.hpp"
#include "recten/metrics.hpp"

using namespace recten;

namespace {

Cluster box(ClusterId id, int level, ClusterId parent, std::array<std::pair<Index, Index>, 3> ranges,
            double strength = 1.0) {
  Cluster c;
  c.id = id;
  c.level = level;
  c.parent = parent;
  c.nnz = 1;
  for (std::size_t m = 0; m < 3; ++m) {
    for (Index i = ranges[m].first; i < ranges[m].second; ++i) c.supports[m].push_back({i, strength});
    c.nnz *= c.supports[m].size();
  }
  c.termination = Termination::rank_one;
  return c;
}

void attach(ClusterTree& t, Cluster c) {
  t.children[c.parent].push_back(c.id);
  t.children[c.id];
  t.nodes[c.id] = std::move(c);
}

// The tree a perfect run on gen_hier would produce.
ClusterTree perfect_hier_tree() {
  ClusterTree t;
  t.root_dims = {125, 125, 10};
  t.children[kRootId] = {};
  ClusterId next = 1;
  for (Index s = 0; s < 5; ++s) {
    const ClusterId sid = next++;
    auto top = box(sid, 1, kRootId, {{{25 * s, 25 * s + 25}, {25 * s, 25 * s + 25}, {0, 10}}});
    top.termination = Termination::none;
    attach(t, top);
    for (Index l = 0; l < 5; ++l) {
      const Index lo = 25 * s + 5 * l;
      attach(t, box(next++, 2, sid, {{{lo, lo + 5}, {lo, lo + 5}, {0, 10}}}));
    }
  }
  return t;
}

}  // namespace

TEST_CASE("total_purity hand values") {
  const int pure[] = {1, 1, 2, 2};
  CHECK(total_purity(oracle::as_partition({0, 0, 1, 1}), pure) == 1.0);
  const int mixed[] = {1, 1, 2};
  CHECK(total_purity(oracle::as_partition({0, 0, 0}), mixed) == doctest::Approx(2.0 / 3));
  const int two[] = {1, 1, 2, 3, 3};
  CHECK(total_purity(oracle::as_partition({0, 0, 0, 1, 1}), two) == doctest::Approx(5.0 / 6));
  // Skipped clusters leave the mean.
  const std::size_t skip[] = {0};
  CHECK(total_purity(oracle::as_partition({0, 0, 0, 1, 1}), two, skip) == 1.0);
  CHECK_THROWS_AS(total_purity(Partition{}, std::span<const int>{}), std::invalid_argument);
  CHECK_THROWS_AS(total_purity(oracle::as_partition({0, 1}), mixed), std::invalid_argument);
}

TEST_CASE("total_purity invariances") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = oracle::random_partition(20, 4, rng);
    std::vector<int> labels(20);
    for (auto& l : labels) l = static_cast<int>(rng.below(3));
    const double base = total_purity(oracle::as_partition(p), labels);
    auto q = p;
    for (auto& x : q) x = 7 - x;
    auto relabeled = labels;
    for (auto& l : relabeled) l = (l + 1) % 3 + 10;
    CHECK(total_purity(oracle::as_partition(q), labels) == doctest::Approx(base).epsilon(1e-15));
    CHECK(total_purity(oracle::as_partition(p), relabeled) == doctest::Approx(base).epsilon(1e-15));
  }
}

TEST_CASE("rand_index") {
  auto p1 = oracle::as_partition({0, 0, 1});
  auto p2 = oracle::as_partition({0, 1, 1});
  CHECK(rand_index(p1, p2) == doctest::Approx(1.0 / 3));
  CHECK(rand_index(p1, p1) == 1.0);
  CHECK_THROWS_AS(rand_index(p1, oracle::as_partition({0, 1})), std::invalid_argument);
  CHECK_THROWS_AS(rand_index(oracle::as_partition({0}), oracle::as_partition({0})), std::invalid_argument);

  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(29);
    auto x = oracle::random_partition(n, 1 + rng.below(6), rng);
    auto y = oracle::random_partition(n, 1 + rng.below(6), rng);
    const double ri = rand_index(oracle::as_partition(x), oracle::as_partition(y));
    CHECK(ri == oracle::rand_index(x, y));
    CHECK(ri == rand_index(oracle::as_partition(y), oracle::as_partition(x)));
    auto moved = x;
    moved[0] = 99;
    if (std::count(x.begin(), x.end(), x[0]) > 1)
      CHECK(rand_index(oracle::as_partition(x), oracle::as_partition(moved)) < 1.0);
  }
}

TEST_CASE("tree_edit_distance small cases") {
  LabeledTree a;
  a.add("r");
  a.add("x", 0);
  a.add("y", 0);
  LabeledTree b;
  b.add("r");
  b.add("x", 0);
  CHECK(tree_edit_distance(a, a) == 0);
  CHECK(tree_edit_distance(a, b) == 1);
  CHECK(tree_edit_distance(b, a) == 1);
  LabeledTree c = b;
  c.nodes[1].label = "z";
  CHECK(tree_edit_distance(b, c) == 1);
  CHECK_THROWS_AS(tree_edit_distance(LabeledTree{}, a), std::invalid_argument);
}

TEST_CASE("tree_edit_distance matches the exhaustive mapping search") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = oracle::random_tree(1 + rng.below(6), rng);
    auto b = oracle::random_tree(1 + rng.below(6), rng);
    CHECK(tree_edit_distance(a, b) == oracle::tree_edit_distance(a, b));
  }
}

TEST_CASE("tree_edit_distance triangle inequality and identity") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = oracle::random_tree(1 + rng.below(7), rng);
    auto b = oracle::random_tree(1 + rng.below(7), rng);
    auto c = oracle::random_tree(1 + rng.below(7), rng);
    CHECK(tree_edit_distance(a, c) <= tree_edit_distance(a, b) + tree_edit_distance(b, c));
    CHECK((tree_edit_distance(a, b) == 0) == (a == b));
  }
}

TEST_CASE("hard_assign") {
  ClusterTree t;
  t.root_dims = {4, 4, 2};
  t.children[kRootId] = {};
  attach(t, box(1, 1, kRootId, {{{0, 2}, {0, 2}, {0, 2}}}, 1.0));
  attach(t, box(2, 1, kRootId, {{{1, 3}, {1, 3}, {0, 2}}}, 2.0));
  attach(t, box(3, 1, kRootId, {{{3, 4}, {3, 4}, {0, 1}}}, 1.0));
  attach(t, box(4, 1, kRootId, {{{3, 4}, {3, 4}, {0, 1}}}, 1.0));
  const std::vector<Coord> cells{{0, 0, 0}, {1, 1, 0}, {2, 2, 1}, {3, 3, 0}, {0, 3, 1}};
  auto ids = assign_leaves(t, cells);
  CHECK(ids[0] == 1);
  CHECK(ids[1] == 2);  // 8 > 1
  CHECK(ids[2] == 2);
  CHECK(ids[3] == 3);  // tie goes to the smaller id
  CHECK(ids[4] == kUnclustered);
  auto p = hard_assign(t, cells);
  CHECK(p.cluster_count == 4);
  CHECK(p.assignment[1] == p.assignment[2]);
}

TEST_CASE("tree_for_ted") {
  auto g = gen_hier(5);
  auto truth = truth_tree(g.truth);
  CHECK(truth.nodes.size() == 31);
  CHECK(tree_edit_distance(truth, truth) == 0);

  auto perfect = perfect_hier_tree();
  CHECK(validate_tree(perfect).empty());
  CHECK(tree_edit_distance(tree_for_ted(perfect, g.truth), truth) == 0);

  // Dropping one leaf costs one deletion.
  auto pruned = perfect;
  const ClusterId gone = pruned.children[1].back();
  pruned.children[1].pop_back();
  pruned.children.erase(gone);
  pruned.nodes.erase(gone);
  REQUIRE(validate_tree(pruned).empty());
  const auto pruned_ted = tree_for_ted(pruned, g.truth);
  CHECK(tree_edit_distance(pruned_ted, truth) == 1);

  auto ev = evaluate(perfect, g.truth);
  CHECK(ev.ted == 0);
  CHECK(ev.tp == 1.0);
}

TEST_CASE("evaluate_partition keeps unclustered cells in RI only") {
  ClusterTree t;
  t.root_dims = {4, 4, 1};
  t.children[kRootId] = {};
  attach(t, box(1, 1, kRootId, {{{0, 2}, {0, 2}, {0, 1}}}));
  std::map<Coord, int> labels{{{0, 0, 0}, 1}, {{1, 1, 0}, 1}, {{3, 3, 0}, 2}, {{3, 2, 0}, 3}};
  auto ev = evaluate_partition(t, labels);
  CHECK(ev.cells == 4);
  CHECK(ev.tp == 1.0);
  // Partition {c1,c2}{c3,c4} vs labels {c1,c2}{c3}{c4}: 5 of 6 pairs agree.
  CHECK(ev.ri == doctest::Approx(5.0 / 6));

  const Coord extra[] = {{0, 1, 0}};
  auto ev2 = evaluate_partition(t, labels, extra);
  CHECK(ev2.cells == 5);
}

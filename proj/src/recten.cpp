#include "recten/recten.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>

#include "recten/parallel.hpp"

namespace recten {

namespace {

constexpr double kSupportGuard = 1e-12;
constexpr std::uint64_t kMaxMaterialized = 50'000'000;

// Stream tags for derive_seed.
constexpr std::uint64_t kTagPerturb = 1;
constexpr std::uint64_t kTagRank = 2;
constexpr std::uint64_t kTagFit = 3;

// A tensor re-indexed onto its non-empty slices.
struct Compact {
  SparseTensor3 tensor;
  std::array<std::vector<Index>, 3> to_root;
};

Compact compact(const SparseTensor3& t) {
  Compact c;
  for (std::size_t m = 0; m < 3; ++m) {
    auto& ids = c.to_root[m];
    ids.reserve(t.nnz());
    for (const auto& e : t.entries()) ids.push_back(e.idx[m]);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  std::vector<Entry> local;
  local.reserve(t.nnz());
  for (const auto& e : t.entries()) {
    Entry l = e;
    for (std::size_t m = 0; m < 3; ++m) {
      const auto& ids = c.to_root[m];
      l.idx[m] = static_cast<Index>(std::lower_bound(ids.begin(), ids.end(), e.idx[m]) - ids.begin());
    }
    local.push_back(l);
  }
  c.tensor = SparseTensor3::from_coo({c.to_root[0].size(), c.to_root[1].size(), c.to_root[2].size()},
                                     std::move(local));
  return c;
}

const SupportEntry* find_support(const std::vector<SupportEntry>& s, Index i) {
  auto it = std::lower_bound(s.begin(), s.end(), i, [](const SupportEntry& x, Index v) { return x.index < v; });
  return (it != s.end() && it->index == i) ? &*it : nullptr;
}

std::uint64_t support_product(const Cluster& c) {
  return static_cast<std::uint64_t>(c.supports[0].size()) * c.supports[1].size() * c.supports[2].size();
}

SolverOptions solver_options(const RecTenParams& p, std::uint64_t seed) {
  SolverOptions o;
  o.lambda = p.lambda;
  o.max_sweeps = p.max_sweeps;
  o.rel_tol = p.rel_tol;
  o.seed = seed;
  return o;
}

struct Expansion {
  Termination termination = Termination::none;
  std::vector<Cluster> children;
  std::shared_ptr<const SparseTensor3> child_source;
  bool estimated = false;
  bool decomposed = false;
};

// Rank-estimate, decompose and extract clusters from a tensor in root coordinates.
std::vector<Cluster> decompose_level(const Compact& local, std::size_t rank, const RecTenParams& p,
                                     std::uint64_t node, int level) {
  const auto fit = nncp_als_l1(local.tensor, rank, solver_options(p, derive_seed(p.seed, {kTagFit, node})));
  auto kids = extract_clusters(fit.model, level, node);
  for (auto& kid : kids) {
    for (std::size_t m = 0; m < 3; ++m)
      for (auto& s : kid.supports[m]) s.index = local.to_root[m][s.index];
  }
  return kids;
}

// Strength product of c at a cell, 0 off its support grid.
double strength_at(const Cluster& c, const std::array<Index, 3>& idx) {
  double v = 1.0;
  for (std::size_t m = 0; m < 3; ++m) {
    const SupportEntry* s = find_support(c.supports[m], idx[m]);
    if (!s) return 0.0;
    v *= s->strength;
  }
  return v;
}

Expansion expand(const Cluster& c, const SparseTensor3& source, const std::vector<const Cluster*>& siblings,
                 const Dims& root_dims, const RecTenParams& p) {
  std::vector<std::uint64_t> sibling_nnz;
  for (const Cluster* s : siblings) sibling_nnz.push_back(s->nnz);
  Expansion out;
  if (too_small(c.nnz, sibling_nnz, p.k)) {
    out.termination = Termination::too_small;
    return out;
  }
  if (c.level >= p.max_depth) {
    out.termination = Termination::too_deep;
    return out;
  }

  Rng rng(derive_seed(p.seed, {kTagPerturb, c.id}));
  SparseTensor3 next;
  if (p.next_level == NextLevelInput::rank_one) {
    if (support_product(c) > kMaxMaterialized) {
      throw std::runtime_error("cluster " + std::to_string(c.id) + " is too large to materialize");
    }
    next = perturb(cluster_to_tensor(c, root_dims), p.epsilon, rng);
  } else {
    std::vector<Entry> kept;
    std::vector<double> weights;
    // The parent's data where this cluster carries most of the siblings'
    // combined reconstruction.
    for (const auto& e : source.entries()) {
      const double own = strength_at(c, e.idx);
      if (!(own > 0.0)) continue;
      double others = 0.0;
      for (const Cluster* s : siblings) others += strength_at(*s, e.idx);
      if (!(own > others)) continue;
      kept.push_back(e);
      weights.push_back(own);
    }
    if (kept.empty()) {
      out.termination = Termination::no_components;
      return out;
    }
    // kept is already canonical (a filtered canonical list).
    const auto restricted = SparseTensor3::from_coo(root_dims, std::move(kept));
    next = perturb_weighted(restricted, weights, p.epsilon, rng);
  }

  const Compact local = compact(next);
  const SolverOptions ro = solver_options(p, derive_seed(p.seed, {kTagRank, c.id}));
  const auto est = estimate_rank(local.tensor, p.r_max, p.cc_threshold, ro);
  out.estimated = true;
  if (est.rank <= 1) {
    out.termination = Termination::rank_one;
    return out;
  }
  out.children = decompose_level(local, est.rank, p, c.id, c.level + 1);
  out.decomposed = true;
  if (out.children.empty()) {
    out.termination = Termination::no_components;
    return out;
  }
  out.child_source = std::make_shared<const SparseTensor3>(std::move(next));
  return out;
}

}  // namespace

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::none: return "none";
    case Termination::too_small: return "too_small";
    case Termination::rank_one: return "rank_one";
    case Termination::too_deep: return "too_deep";
    case Termination::no_components: return "no_components";
  }
  return "none";
}

Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::none, Termination::too_small, Termination::rank_one, Termination::too_deep,
                 Termination::no_components}) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown termination '" + std::string(s) + "'");
}

std::string_view to_string(NextLevelInput n) { return n == NextLevelInput::rank_one ? "rank_one" : "restricted"; }

NextLevelInput next_level_from_string(std::string_view s) {
  if (s == "rank_one") return NextLevelInput::rank_one;
  if (s == "restricted") return NextLevelInput::restricted;
  throw std::invalid_argument("unknown next-level input '" + std::string(s) + "'");
}

const std::vector<ClusterId>& ClusterTree::children_of(ClusterId id) const {
  static const std::vector<ClusterId> none;
  auto it = children.find(id);
  return it == children.end() ? none : it->second;
}

std::vector<ClusterId> ClusterTree::leaves() const {
  std::vector<ClusterId> out;
  for (const auto& [id, node] : nodes)
    if (is_leaf(id)) out.push_back(id);
  return out;
}

std::vector<std::size_t> ClusterTree::level_counts() const {
  std::vector<std::size_t> counts;
  for (const auto& [id, node] : nodes) {
    const auto lvl = static_cast<std::size_t>(node.level);
    if (counts.size() < lvl) counts.resize(lvl, 0);
    ++counts[lvl - 1];
  }
  return counts;
}

std::string validate_tree(const ClusterTree& tree) {
  std::set<ClusterId> seen;
  std::vector<std::pair<ClusterId, int>> stack{{kRootId, 0}};
  while (!stack.empty()) {
    auto [id, level] = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) return "node " + std::to_string(id) + " reached twice";
    for (ClusterId kid : tree.children_of(id)) {
      auto it = tree.nodes.find(kid);
      if (it == tree.nodes.end()) return "child " + std::to_string(kid) + " has no node";
      const Cluster& c = it->second;
      if (c.id != kid) return "node key/id mismatch at " + std::to_string(kid);
      if (c.parent != id) return "node " + std::to_string(kid) + " has wrong parent";
      if (c.level != level + 1) return "node " + std::to_string(kid) + " has wrong level";
      stack.emplace_back(kid, c.level);
    }
  }
  for (const auto& [id, c] : tree.nodes) {
    if (!seen.count(id)) return "node " + std::to_string(id) + " unreachable from root";
    for (std::size_t m = 0; m < 3; ++m) {
      const auto& s = c.supports[m];
      if (s.empty()) return "node " + std::to_string(id) + " has an empty support";
      for (std::size_t n = 0; n < s.size(); ++n) {
        if (!(s[n].strength > 0.0)) return "node " + std::to_string(id) + " has a non-positive strength";
        if (s[n].index >= tree.root_dims[m]) return "node " + std::to_string(id) + " index out of range";
        if (n > 0 && s[n - 1].index >= s[n].index) return "node " + std::to_string(id) + " support not sorted";
      }
    }
    if (c.nnz != support_product(c)) return "node " + std::to_string(id) + " nnz mismatch";
  }
  for (const auto& [id, kids] : tree.children) {
    if (id != kRootId && !tree.nodes.count(id)) return "children listed for missing node " + std::to_string(id);
  }
  return {};
}

void RecTenParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 100.0)) throw std::invalid_argument("epsilon must be in (0, 100)");
  if (!(k > 0.0 && k < 100.0)) throw std::invalid_argument("k must be in (0, 100)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (r_max < 1) throw std::invalid_argument("r_max must be at least 1");
  if (!(cc_threshold > 0.0 && cc_threshold <= 100.0)) throw std::invalid_argument("cc_threshold must be in (0, 100]");
  if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be at least 1");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
}

std::vector<Cluster> extract_clusters(const CpModel& model, int level, ClusterId parent) {
  std::vector<Cluster> out;
  for (std::size_t r = 0; r < model.rank(); ++r) {
    Cluster c;
    c.level = level;
    c.parent = parent;
    bool empty = false;
    for (std::size_t m = 0; m < 3 && !empty; ++m) {
      const auto& f = model.factor(m);
      const auto col = static_cast<Eigen::Index>(r);
      for (Eigen::Index i = 0; i < f.rows(); ++i) {
        const double v = f(i, col);
        if (v > kSupportGuard) c.supports[m].push_back({static_cast<Index>(i), v});
      }
      empty = c.supports[m].empty();
    }
    if (empty) continue;
    c.nnz = support_product(c);
    out.push_back(std::move(c));
  }
  return out;
}

SparseTensor3 cluster_to_tensor(const Cluster& c, const Dims& dims) {
  std::vector<Entry> raw;
  raw.reserve(static_cast<std::size_t>(support_product(c)));
  for (const auto& a : c.supports[0])
    for (const auto& b : c.supports[1])
      for (const auto& s : c.supports[2])
        raw.push_back({{a.index, b.index, s.index}, a.strength * b.strength * s.strength});
  return SparseTensor3::from_coo(dims, std::move(raw));
}

std::size_t deletion_count(double epsilon, std::size_t nnz) {
  if (nnz == 0) return 0;
  const double x = epsilon * static_cast<double>(nnz) / 100.0;
  const double nearest = std::round(x);
  const double m = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  return std::min(static_cast<std::size_t>(std::max(0.0, m)), nnz - 1);
}

SparseTensor3 perturb_weighted(const SparseTensor3& t, std::span<const double> weights, double epsilon, Rng& rng) {
  if (t.empty()) throw std::invalid_argument("cannot perturb an empty tensor");
  if (weights.size() != t.nnz()) throw std::invalid_argument("one weight per entry required");
  const std::size_t n = t.nnz();
  const std::size_t m = deletion_count(epsilon, n);

  // Fenwick tree over inverse weights; a removed entry's mass drops to zero so
  // later draws are renormalized over what remains.
  std::vector<double> tree(n + 1, 0.0);
  std::vector<double> mass(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0)) throw std::invalid_argument("perturbation weights must be positive");
    mass[i] = 1.0 / weights[i];
  }
  for (std::size_t i = 1; i <= n; ++i) {
    tree[i] += mass[i - 1];
    const std::size_t up = i + (i & (~i + 1));
    if (up <= n) tree[up] += tree[i];
  }
  auto add = [&](std::size_t i, double v) {
    for (++i; i <= n; i += i & (~i + 1)) tree[i] += v;
  };
  std::size_t top = 1;
  while (top * 2 <= n) top *= 2;

  double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  std::vector<char> removed(n, 0);
  for (std::size_t d = 0; d < m; ++d) {
    double target = rng.uniform() * total;
    std::size_t pos = 0;
    for (std::size_t step = top; step > 0; step >>= 1) {
      if (pos + step <= n && tree[pos + step] <= target) {
        pos += step;
        target -= tree[pos];
      }
    }
    // Guard against landing on an already-removed slot through rounding.
    while (pos < n && removed[pos]) ++pos;
    if (pos >= n) pos = static_cast<std::size_t>(std::find(removed.begin(), removed.end(), 0) - removed.begin());
    removed[pos] = 1;
    add(pos, -mass[pos]);
    total -= mass[pos];
  }

  std::vector<Entry> kept;
  kept.reserve(n - m);
  const auto entries = t.entries();
  for (std::size_t i = 0; i < n; ++i)
    if (!removed[i]) kept.push_back(entries[i]);
  return SparseTensor3::from_coo(t.dims(), std::move(kept));
}

SparseTensor3 perturb(const SparseTensor3& t, double epsilon, Rng& rng) {
  std::vector<double> w;
  w.reserve(t.nnz());
  for (const auto& e : t.entries()) w.push_back(e.value);
  return perturb_weighted(t, w, epsilon, rng);
}

bool too_small(std::uint64_t candidate_nnz, std::span<const std::uint64_t> sibling_nnz, double k) {
  if (sibling_nnz.empty()) return false;
  double total = 0.0;
  for (auto n : sibling_nnz) total += static_cast<double>(n);
  const double mean = total / static_cast<double>(sibling_nnz.size());
  return static_cast<double>(candidate_nnz) * 100.0 / mean < k;
}

bool too_small(const Cluster& candidate, std::span<const Cluster> siblings, double k) {
  std::vector<std::uint64_t> n;
  n.reserve(siblings.size());
  for (const auto& s : siblings) n.push_back(s.nnz);
  return too_small(candidate.nnz, n, k);
}

ClusterTree recten_run(const SparseTensor3& t, const RecTenParams& params, RunStats* stats) {
  params.validate();
  if (t.empty()) throw std::invalid_argument("cannot decompose an empty tensor");
  RunStats local_stats;
  RunStats& st = stats ? *stats : local_stats;

  ClusterTree tree;
  tree.root_dims = t.dims();
  tree.root_nnz = t.nnz();
  tree.children[kRootId] = {};

  const Compact root = compact(t);
  const auto est = estimate_rank(root.tensor, params.r_max, params.cc_threshold,
                                 solver_options(params, derive_seed(params.seed, {kTagRank, kRootId})));
  ++st.rank_estimates;
  ++st.decompositions;
  st.root_rank = est.rank;

  ClusterId next_id = 1;
  auto root_source = std::make_shared<const SparseTensor3>(t);
  std::vector<std::pair<ClusterId, std::shared_ptr<const SparseTensor3>>> frontier;
  for (auto& c : decompose_level(root, est.rank, params, kRootId, 1)) {
    c.id = next_id++;
    tree.children[kRootId].push_back(c.id);
    frontier.emplace_back(c.id, root_source);
    tree.nodes.emplace(c.id, std::move(c));
  }

  while (!frontier.empty()) {
    std::vector<Expansion> results(frontier.size());
    parallel_for(frontier.size(), [&](std::size_t n) {
      const Cluster& c = tree.nodes.at(frontier[n].first);
      std::vector<const Cluster*> siblings;
      for (ClusterId s : tree.children_of(c.parent))
        if (s != c.id) siblings.push_back(&tree.nodes.at(s));
      results[n] = expand(c, *frontier[n].second, siblings, tree.root_dims, params);
    });

    std::vector<std::pair<ClusterId, std::shared_ptr<const SparseTensor3>>> next;
    for (std::size_t n = 0; n < frontier.size(); ++n) {
      const ClusterId id = frontier[n].first;
      auto& res = results[n];
      st.rank_estimates += res.estimated ? 1 : 0;
      st.decompositions += res.decomposed ? 1 : 0;
      tree.nodes.at(id).termination = res.termination;
      auto& kids = tree.children[id];
      for (auto& c : res.children) {
        c.id = next_id++;
        kids.push_back(c.id);
        next.emplace_back(c.id, res.child_source);
        tree.nodes.emplace(c.id, std::move(c));
      }
    }
    frontier = std::move(next);
  }
  return tree;
}

}  // namespace recten

#include "recten/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "recten/rng.hpp"

namespace recten {

std::vector<int> GroundTruth::children_of(int id) const {
  std::vector<int> out;
  for (std::size_t n = 0; n < nodes.size(); ++n)
    if (nodes[n].parent == id) out.push_back(static_cast<int>(n));
  return out;
}

int GroundTruth::ancestor_at_level(int id, int level) const {
  while (id >= 0 && nodes.at(static_cast<std::size_t>(id)).level > level) id = nodes[static_cast<std::size_t>(id)].parent;
  return id;
}

int GroundTruth::max_level() const {
  int m = 0;
  for (const auto& n : nodes) m = std::max(m, n.level);
  return m;
}

const char* to_string(PatternType t) {
  switch (t) {
    case PatternType::SSD: return "SSD";
    case PatternType::SDS: return "SDS";
    case PatternType::DSS: return "DSS";
    case PatternType::DDD: return "DDD";
    case PatternType::DDS: return "DDS";
    case PatternType::DSD: return "DSD";
    case PatternType::SDD: return "SDD";
  }
  return "?";
}

namespace {

constexpr int kTypes = 7;
constexpr int kPerType = 3;
constexpr int kPatterns = kTypes * kPerType;

double draw_value(Rng& rng, double mu, double sigma) { return std::max(0.01, rng.normal(mu, sigma)); }

std::array<bool, 3> shared_axes(int type) {
  const char* name = to_string(static_cast<PatternType>(type));
  return {name[0] == 'S', name[1] == 'S', name[2] == 'S'};
}

int pattern_index(PatternType t, int member) { return static_cast<int>(t) * kPerType + member; }

// Designated overlap pairs; the second pattern is placed after the first and
// copies part of its cells.
struct OverlapPair {
  int first;
  int second;
};

const std::array<OverlapPair, 4>& overlap_pairs() {
  static const std::array<OverlapPair, 4> pairs = {{
      {pattern_index(PatternType::DDD, 0), pattern_index(PatternType::DDS, 0)},
      {pattern_index(PatternType::DDD, 1), pattern_index(PatternType::DSD, 0)},
      {pattern_index(PatternType::DDS, 1), pattern_index(PatternType::SDD, 0)},
      {pattern_index(PatternType::DSD, 1), pattern_index(PatternType::SDD, 1)},
  }};
  return pairs;
}

using Offset = std::array<int, 3>;

Offset add(const Offset& a, const Offset& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Offset sub(const Offset& a, const Offset& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

struct Layout {
  std::array<int, 3> lim{};  // per-axis offset bound
  std::array<int, 3> sep{};  // minimum clustroid separation on a differing axis
  std::array<int, 3> lo{}, hi{};
  std::vector<Offset> ball;  // admissible offsets
  std::set<Offset> ball_set;
  int dispersion = 0;

  bool in_ball(const Offset& o) const { return ball_set.count(o) > 0; }
};

Layout make_layout(const FlatParams& p) {
  Layout l;
  l.dispersion = p.dispersion;
  for (int a = 0; a < 3; ++a) {
    // Three disjoint windows must fit along every axis.
    const int room = static_cast<int>(p.dims[static_cast<std::size_t>(a)]) / 3 - 1;
    if (room < 0) throw std::invalid_argument("gen_flat: every dimension must be at least 3");
    l.lim[static_cast<std::size_t>(a)] = std::min(p.dispersion, room / 2);
    l.sep[static_cast<std::size_t>(a)] = 2 * l.lim[static_cast<std::size_t>(a)] + 2;
    l.lo[static_cast<std::size_t>(a)] = l.lim[static_cast<std::size_t>(a)];
    l.hi[static_cast<std::size_t>(a)] = static_cast<int>(p.dims[static_cast<std::size_t>(a)]) - 1 - l.lim[static_cast<std::size_t>(a)];
  }
  for (int x = -l.lim[0]; x <= l.lim[0]; ++x)
    for (int y = -l.lim[1]; y <= l.lim[1]; ++y)
      for (int z = -l.lim[2]; z <= l.lim[2]; ++z)
        if (std::abs(x) + std::abs(y) + std::abs(z) <= p.dispersion) l.ball.push_back({x, y, z});
  l.ball_set.insert(l.ball.begin(), l.ball.end());
  return l;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t n = v.size(); n > 1; --n) std::swap(v[n - 1], v[rng.below(n)]);
}

int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

struct Attempt {
  std::array<Offset, kPatterns> centers{};
  std::array<std::vector<Offset>, kTypes> offsets;
};

// How many more points fit in [lo, hi] at least `sep` apart from each other
// and from `taken`. Leftmost-first greedy is optimal on a line.
int spare_slots(const std::vector<int>& taken, int lo, int hi, int sep) {
  int count = 0;
  for (int x = lo; x <= hi;) {
    bool free = true;
    for (int t : taken) free = free && std::abs(t - x) >= sep;
    if (free) {
      ++count;
      x += sep;
    } else {
      ++x;
    }
  }
  return count;
}

// Constraints are per axis: members of a type share the value on S axes and
// sit at least `sep` apart on D axes, and the second pattern of an overlap
// pair is within 1 of the first. Each axis is solved by randomized
// backtracking; returns false when the node budget runs out.
class AxisSolver {
 public:
  AxisSolver(const Layout& l, std::size_t axis, Rng& rng, Attempt& at)
      : lo_(l.lo[axis]), hi_(l.hi[axis]), sep_(l.sep[axis]), axis_(axis), rng_(rng), at_(at) {}

  bool solve() { return place(0); }

 private:
  int& value(int p) { return at_.centers[static_cast<std::size_t>(p)][axis_]; }

  bool fits(int p, int v) {
    const int type = p / kPerType;
    for (int o = type * kPerType; o < p; ++o)
      if (std::abs(value(o) - v) < sep_) return false;
    for (const auto& pr : overlap_pairs())
      if (pr.second == p && std::abs(value(pr.first) - v) > 1) return false;
    // Leave room for the rest of the triple.
    std::vector<int> taken{v};
    for (int o = type * kPerType; o < p; ++o) taken.push_back(value(o));
    return spare_slots(taken, lo_, hi_, sep_) >= (type + 1) * kPerType - 1 - p;
  }

  bool place(int p) {
    if (p == kPatterns) return true;
    if (--budget_ < 0) return false;
    const int type = p / kPerType;
    const bool shared = shared_axes(type)[axis_];
    std::vector<int> cand;
    if (shared && p % kPerType != 0) {
      cand.push_back(value(type * kPerType));
    } else {
      int lo = lo_, hi = hi_;
      for (const auto& pr : overlap_pairs())
        if (pr.second == p) lo = std::max(lo, value(pr.first) - 1), hi = std::min(hi, value(pr.first) + 1);
      for (int v = lo; v <= hi; ++v) cand.push_back(v);
      shuffle(cand, rng_);
    }
    for (int v : cand) {
      if (!shared && !fits(p, v)) continue;
      if (shared) {
        bool ok = true;
        for (const auto& pr : overlap_pairs())
          if (pr.second == p && std::abs(value(pr.first) - v) > 1) ok = false;
        if (!ok) continue;
      }
      value(p) = v;
      if (place(p + 1)) return true;
      if (budget_ < 0) return false;
    }
    return false;
  }

  int lo_, hi_, sep_;
  std::size_t axis_;
  Rng& rng_;
  Attempt& at_;
  int budget_ = 20000;
};

bool place_centers(const Layout& l, Rng& rng, Attempt& at) {
  for (std::size_t a = 0; a < 3; ++a)
    if (!AxisSolver(l, a, rng, at).solve()) return false;
  return true;
}

bool choose_offsets(const Layout& l, int rho, int shared_cells, Rng& rng, Attempt& at) {
  for (int type = 0; type < kTypes; ++type) {
    auto& mine = at.offsets[static_cast<std::size_t>(type)];
    // Offsets of this type that land on the first pattern of each pair where
    // a member of this type comes second.
    std::vector<std::set<Offset>> hits;
    for (const auto& pr : overlap_pairs()) {
      if (pr.second / kPerType != type) continue;
      const Offset shift = sub(at.centers[static_cast<std::size_t>(pr.first)], at.centers[static_cast<std::size_t>(pr.second)]);
      std::set<Offset> h;
      for (const auto& o : at.offsets[static_cast<std::size_t>(pr.first / kPerType)]) {
        const Offset moved = add(o, shift);
        if (l.in_ball(moved)) h.insert(moved);
      }
      hits.push_back(std::move(h));
    }
    auto hit_count = [&](const Offset& o) {
      int n = 0;
      for (const auto& h : hits) n += h.count(o) ? 1 : 0;
      return n;
    };
    // Exactly shared_cells offsets per pair, each hitting that pair only.
    std::set<Offset> used;
    for (const auto& h : hits) {
      std::vector<Offset> cand;
      for (const auto& o : h)
        if (hit_count(o) == 1) cand.push_back(o);
      if (static_cast<int>(cand.size()) < shared_cells) return false;
      shuffle(cand, rng);
      for (int n = 0; n < shared_cells; ++n) {
        used.insert(cand[static_cast<std::size_t>(n)]);
        mine.push_back(cand[static_cast<std::size_t>(n)]);
      }
    }
    std::vector<Offset> pool = l.ball;
    shuffle(pool, rng);
    for (const auto& o : pool) {
      if (static_cast<int>(mine.size()) >= rho) break;
      if (hit_count(o) == 0 && used.insert(o).second) mine.push_back(o);
    }
    if (static_cast<int>(mine.size()) < rho) return false;
  }
  return true;
}

// Exactly the designated pairs may share cells, each exactly `shared_cells`.
bool overlaps_as_designed(const std::vector<std::vector<Coord>>& cells, int shared_cells) {
  std::map<Coord, std::vector<int>> owners;
  for (int p = 0; p < kPatterns; ++p)
    for (const auto& c : cells[static_cast<std::size_t>(p)]) owners[c].push_back(p);
  std::map<std::pair<int, int>, int> shared;
  for (const auto& [c, who] : owners) {
    if (who.size() > 2) return false;
    if (who.size() == 2) ++shared[{std::min(who[0], who[1]), std::max(who[0], who[1])}];
  }
  if (shared.size() != overlap_pairs().size()) return false;
  for (const auto& pr : overlap_pairs()) {
    auto it = shared.find({std::min(pr.first, pr.second), std::max(pr.first, pr.second)});
    if (it == shared.end() || it->second != shared_cells) return false;
  }
  return true;
}

}  // namespace

void FlatParams::validate() const {
  for (auto d : dims)
    if (d == 0) throw std::invalid_argument("gen_flat: dimensions must be positive");
  if (dispersion < 0) throw std::invalid_argument("gen_flat: dispersion must be >= 0");
  if (concentration < 1) throw std::invalid_argument("gen_flat: concentration must be >= 1");
  if (!(sigma >= 0.0) || !(mu > 3.0 * sigma)) throw std::invalid_argument("gen_flat: need mu > 3 sigma >= 0");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw std::invalid_argument("gen_flat: overlap fraction must be in [0, 1)");
  if (max_retries < 1) throw std::invalid_argument("gen_flat: max_retries must be >= 1");
}

SyntheticTensor gen_flat(const FlatParams& params, std::uint64_t seed) {
  params.validate();
  const Layout layout = make_layout(params);
  const int rho = params.concentration;
  if (static_cast<int>(layout.ball.size()) < rho)
    throw std::invalid_argument("gen_flat: concentration exceeds the cells within the dispersion radius");
  const int shared_cells = static_cast<int>(std::lround(params.overlap_fraction * rho));

  Rng rng(derive_seed(seed, {0x666c6174}));
  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    Attempt at;
    if (!place_centers(layout, rng, at) || !choose_offsets(layout, rho, shared_cells, rng, at)) continue;
    std::vector<std::vector<Coord>> cells(kPatterns);
    for (int p = 0; p < kPatterns; ++p)
      for (const auto& o : at.offsets[static_cast<std::size_t>(p / kPerType)]) {
        const Offset c = add(at.centers[static_cast<std::size_t>(p)], o);
        cells[static_cast<std::size_t>(p)].push_back({static_cast<Index>(c[0]), static_cast<Index>(c[1]), static_cast<Index>(c[2])});
      }
    if (!overlaps_as_designed(cells, shared_cells)) continue;

    SyntheticTensor out;
    out.truth.nodes.push_back({"root", -1, 0});
    for (int p = 0; p < kPatterns; ++p)
      out.truth.nodes.push_back({"C" + std::to_string(p + 1), 0, 1});
    std::map<Coord, double> values;
    for (int p = 0; p < kPatterns; ++p) {
      PatternSpec spec;
      spec.type = static_cast<PatternType>(p / kPerType);
      const auto& c = at.centers[static_cast<std::size_t>(p)];
      spec.clustroid = {static_cast<Index>(c[0]), static_cast<Index>(c[1]), static_cast<Index>(c[2])};
      spec.dispersion = params.dispersion;
      spec.concentration = rho;
      spec.mu = params.mu;
      spec.sigma = params.sigma;
      spec.cells = cells[static_cast<std::size_t>(p)];
      for (const auto& cell : spec.cells) {
        const double v = draw_value(rng, params.mu, params.sigma);
        auto [it, fresh] = values.emplace(cell, v);
        if (fresh || v > it->second) {
          it->second = v;
          out.truth.labels[cell] = p + 1;
        }
      }
      out.patterns.push_back(std::move(spec));
    }
    std::vector<Entry> entries;
    entries.reserve(values.size());
    for (const auto& [cell, v] : values) entries.push_back({cell, v});
    out.tensor = SparseTensor3::from_coo(params.dims, std::move(entries));
    return out;
  }
  throw std::runtime_error("gen_flat: could not place patterns within the retry budget");
}

void HierParams::validate() const {
  if (!(leaf_density > 0.0 && leaf_density <= 1.0)) throw std::invalid_argument("gen_hier: leaf density must be in (0, 1]");
  if (!(background_weight >= 0.0 && background_weight <= 1.0))
    throw std::invalid_argument("gen_hier: background weight must be in [0, 1]");
  if (!(leaf_jitter >= 0.0 && leaf_jitter < 1.0)) throw std::invalid_argument("gen_hier: leaf jitter must be in [0, 1)");
  if (slices == 0) throw std::invalid_argument("gen_hier: need at least one slice");
  if (!(sigma >= 0.0) || !(mu > 3.0 * sigma)) throw std::invalid_argument("gen_hier: need mu > 3 sigma >= 0");
  if (evolving_leaves > 25) throw std::invalid_argument("gen_hier: at most 25 leaf blocks can evolve");
  if (evolving_cells > 25) throw std::invalid_argument("gen_hier: a leaf block has 25 cells");
}

SyntheticTensor gen_hier(const HierParams& params, std::uint64_t seed) {
  params.validate();
  constexpr std::size_t n = 125;
  const bool block = params.initiator == HierParams::Initiator::block;
  Rng rng(derive_seed(seed, {0x68696572}));
  auto at = [](std::size_t i, std::size_t j) { return i * n + j; };
  auto same_leaf = [](std::size_t i, std::size_t j) { return i / 5 == j / 5; };

  // Leaf part and background part of the base slice.
  std::vector<double> leaf(n * n, 0.0), background(n * n, 0.0);
  if (block) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i / 25 != j / 25) continue;
        if (!same_leaf(i, j)) {
          if (params.background_weight > 0.0)
            background[at(i, j)] = params.background_weight * draw_value(rng, params.mu, params.sigma);
        } else if (params.leaf_density >= 1.0 || rng.uniform() < params.leaf_density) {
          leaf[at(i, j)] = draw_value(rng, params.mu, params.sigma);
        }
      }
  } else {
    for (std::size_t i = 0; i < n; ++i) leaf[at(i, i)] = draw_value(rng, params.mu, params.sigma);
  }

  SyntheticTensor out;
  out.truth.nodes.push_back({"root", -1, 0});
  for (int s = 0; s < 5; ++s) out.truth.nodes.push_back({"S" + std::to_string(s + 1), 0, 1});
  for (int s = 0; s < 5; ++s)
    for (int l = 0; l < 5; ++l)
      out.truth.nodes.push_back({"S" + std::to_string(s + 1) + ".L" + std::to_string(l + 1), 1 + s, 2});

  std::vector<Entry> entries;
  for (std::size_t k = 0; k < params.slices; ++k) {
    std::vector<double> slice = leaf;
    // Leaf blocks still holding enough empty cells to refill.
    std::vector<std::size_t> open;
    for (std::size_t b = 0; b < 25; ++b) {
      std::size_t zeros = 0;
      for (std::size_t i = b * 5; i < b * 5 + 5; ++i)
        for (std::size_t j = b * 5; j < b * 5 + 5; ++j) zeros += slice[at(i, j)] == 0.0;
      if (zeros >= params.evolving_cells) open.push_back(b);
    }
    shuffle(open, rng);
    const std::size_t pick = std::min(params.evolving_leaves, open.size());
    for (std::size_t q = 0; q < pick; ++q) {
      std::vector<std::size_t> zero_cells;
      for (std::size_t i = open[q] * 5; i < open[q] * 5 + 5; ++i)
        for (std::size_t j = open[q] * 5; j < open[q] * 5 + 5; ++j)
          if (slice[at(i, j)] == 0.0) zero_cells.push_back(at(i, j));
      shuffle(zero_cells, rng);
      for (std::size_t z = 0; z < params.evolving_cells; ++z) slice[zero_cells[z]] = draw_value(rng, params.mu, params.sigma);
    }
    if (block && params.leaf_jitter > 0.0) {
      for (std::size_t b = 0; b < 25; ++b) {
        const double f = rng.uniform(1.0 - params.leaf_jitter, 1.0 + params.leaf_jitter);
        for (std::size_t i = b * 5; i < b * 5 + 5; ++i)
          for (std::size_t j = b * 5; j < b * 5 + 5; ++j) slice[at(i, j)] *= f;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double value = slice[at(i, j)] + background[at(i, j)];
        if (value == 0.0) continue;
        const Coord c{static_cast<Index>(i), static_cast<Index>(j), static_cast<Index>(k)};
        entries.push_back({c, value});
        if (i / 25 != j / 25) continue;
        const int s = static_cast<int>(i / 25);
        out.truth.labels[c] = same_leaf(i, j) ? 6 + s * 5 + static_cast<int>(i / 5 % 5) : 1 + s;
      }
  }
  out.tensor = SparseTensor3::from_coo({n, n, params.slices}, std::move(entries));
  return out;
}

SparseTensor3 add_noise(const SparseTensor3& t, double n_percent, std::uint64_t seed) {
  if (!(n_percent >= 0.0 && n_percent < 100.0)) throw std::invalid_argument("add_noise: noise percentage must be in [0, 100)");
  if (n_percent == 0.0) return t;
  const auto& d = t.dims();
  const std::uint64_t grid = static_cast<std::uint64_t>(d[0]) * d[1];
  const double exact = n_percent * static_cast<double>(grid) / 100.0;
  const double nearest = std::round(exact);
  const auto per_slice = static_cast<std::uint64_t>(std::fabs(exact - nearest) < 1e-9 ? nearest : std::ceil(exact));

  Rng rng(derive_seed(seed, {0x6e6f6973}));
  std::vector<Entry> entries(t.entries().begin(), t.entries().end());
  for (std::size_t k = 0; k < d[2]; ++k) {
    // Floyd's algorithm: per_slice distinct cells, uniform over the grid.
    std::set<std::uint64_t> chosen;
    for (std::uint64_t r = grid - per_slice; r < grid; ++r) {
      const std::uint64_t v = rng.below(r + 1);
      if (!chosen.insert(v).second) chosen.insert(r);
    }
    for (auto cell : chosen)
      entries.push_back({{static_cast<Index>(cell / d[1]), static_cast<Index>(cell % d[1]), static_cast<Index>(k)}, std::fabs(rng.normal())});
  }
  return SparseTensor3::from_coo(d, std::move(entries));
}

void write_labels(std::ostream& out, const GroundTruth& truth) {
  for (const auto& [c, label] : truth.labels) out << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << label << '\n';
}

std::map<Coord, int> read_labels(std::istream& in) {
  std::map<Coord, int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long long i, j, k;
    int label;
    if (!(ls >> i)) continue;
    std::string rest;
    if (!(ls >> j >> k >> label) || (ls >> rest) || i < 0 || j < 0 || k < 0 || label < 0)
      throw std::runtime_error("labels line " + std::to_string(lineno) + ": expected `i j k label`");
    labels[{static_cast<Index>(i), static_cast<Index>(j), static_cast<Index>(k)}] = label;
  }
  return labels;
}

void write_labels_file(const std::string& path, const GroundTruth& truth) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_labels(f, truth);
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::map<Coord, int> read_labels_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_labels(f);
}

}  // namespace recten

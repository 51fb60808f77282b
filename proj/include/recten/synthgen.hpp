#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "recten/tensor.hpp"

namespace recten {

using Coord = std::array<Index, 3>;

/// Node of a reference hierarchy. The node's position in GroundTruth::nodes is
/// its label id; node 0 is the root.
struct TruthNode {
  std::string label;
  int parent = -1;
  int level = 0;
};

/// Cell labels plus the labeled reference tree they point into.
struct GroundTruth {
  std::vector<TruthNode> nodes;
  /// Cell -> id of the deepest truth node containing it.
  std::map<Coord, int> labels;

  std::vector<int> children_of(int id) const;
  /// Ancestor of `id` at `level`, or `id` itself if it is not that deep.
  int ancestor_at_level(int id, int level) const;
  int max_level() const;
};

enum class PatternType { SSD, SDS, DSS, DDD, DDS, DSD, SDD };

const char* to_string(PatternType t);

/// One injected flat pattern: a clustroid and the cells scattered around it.
struct PatternSpec {
  PatternType type = PatternType::SSD;
  Coord clustroid{};
  int dispersion = 5;
  int concentration = 60;
  double mu = 10.0;
  double sigma = 3.0;
  std::vector<Coord> cells;
};

struct FlatParams {
  Dims dims{300, 300, 30};
  int dispersion = 5;
  int concentration = 60;
  double mu = 10.0;
  double sigma = 3.0;
  /// Fraction of a pattern's cells shared with its designated overlap partner.
  double overlap_fraction = 0.2;
  int max_retries = 20000;

  void validate() const;
};

struct SyntheticTensor {
  SparseTensor3 tensor;
  GroundTruth truth;
  std::vector<PatternSpec> patterns;
};

/// 21 patterns, three per type. Within a type the three patterns share their
/// coordinate range on the S axes and use disjoint ranges on the D axes; four
/// designated cross-type pairs among DDD/DDS/DSD/SDD share cells. Throws
/// std::invalid_argument for invalid parameters and std::runtime_error when
/// placement retries run out.
SyntheticTensor gen_flat(const FlatParams& params, std::uint64_t seed);

/// Two-level hierarchy on a 125 x 125 base slice stacked in time. Index i
/// splits into base-5 digits (superblock, leaf block, cell).
struct HierParams {
  enum class Initiator {
    /// Support of K1 (x) K1 (x) K1 with K1 the 5 x 5 diagonal: 125 diagonal
    /// cells and nothing else.
    diagonal,
    /// Leaf blocks on the diagonal of each superblock, the rest of the
    /// superblock filled with a weaker background.
    block,
  };
  Initiator initiator = Initiator::block;
  /// block: chance that a leaf block cell carries a leaf value.
  double leaf_density = 0.9;
  /// block: superblock cells outside the leaf blocks hold
  /// background_weight * G(mu, sigma).
  double background_weight = 0.4;
  /// block: per slice, the leaf values of each leaf block are scaled by a
  /// factor from U(1 - jitter, 1 + jitter).
  double leaf_jitter = 0.2;
  std::size_t slices = 10;
  /// Values are G(mu, sigma), floored at 0.01.
  double mu = 10.0;
  double sigma = 3.0;
  /// Per slice: leaf blocks that change, and empty leaf cells refilled in each.
  std::size_t evolving_leaves = 10;
  std::size_t evolving_cells = 2;

  void validate() const;
};

/// Ground truth: 5 superblock labels (25 x 25) and 25 leaf labels (5 x 5).
SyntheticTensor gen_hier(const HierParams& params, std::uint64_t seed);
inline SyntheticTensor gen_hier(std::uint64_t seed) { return gen_hier(HierParams{}, seed); }

/// Per time slice, ceil(n% of I*J) grid cells chosen uniformly without
/// replacement receive |G(0,1)|. Throws std::invalid_argument unless 0 <= n < 100.
SparseTensor3 add_noise(const SparseTensor3& t, double n_percent, std::uint64_t seed);

/// Labels file: one `i j k label_id` line per labeled cell.
void write_labels(std::ostream& out, const GroundTruth& truth);
std::map<Coord, int> read_labels(std::istream& in);
void write_labels_file(const std::string& path, const GroundTruth& truth);
std::map<Coord, int> read_labels_file(const std::string& path);

}  // namespace recten

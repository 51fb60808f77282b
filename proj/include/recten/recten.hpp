#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recten/rng.hpp"
#include "recten/solver.hpp"
#include "recten/tensor.hpp"

namespace recten {

using ClusterId = std::uint64_t;

/// Id of the input tensor node; clusters are numbered from 1 in creation order.
inline constexpr ClusterId kRootId = 0;

enum class Termination { none, too_small, rank_one, too_deep, no_components };

std::string_view to_string(Termination t);
/// Throws std::invalid_argument on an unknown name.
Termination termination_from_string(std::string_view s);

struct SupportEntry {
  Index index = 0;
  double strength = 0.0;

  friend bool operator==(const SupportEntry&, const SupportEntry&) = default;
};

/// One rank-one component with the zero entries of its factor columns removed.
/// Support indices always refer to the root tensor.
struct Cluster {
  ClusterId id = 0;
  int level = 1;
  ClusterId parent = kRootId;
  std::array<std::vector<SupportEntry>, 3> supports;
  std::uint64_t nnz = 0;
  Termination termination = Termination::none;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterTree {
  Dims root_dims{0, 0, 0};
  std::uint64_t root_nnz = 0;
  std::map<ClusterId, Cluster> nodes;
  /// Ordered child lists, including an entry for kRootId.
  std::map<ClusterId, std::vector<ClusterId>> children;

  const std::vector<ClusterId>& children_of(ClusterId id) const;
  bool is_leaf(ClusterId id) const { return children_of(id).empty(); }
  std::vector<ClusterId> leaves() const;
  /// Cluster count per level; element 0 is level 1.
  std::vector<std::size_t> level_counts() const;

  friend bool operator==(const ClusterTree&, const ClusterTree&) = default;
};

/// Structural check: acyclic, parent/child links agree, levels increase by one,
/// supports positive and sorted, nnz equals the support product. Returns an
/// empty string when valid, otherwise the first violation found.
std::string validate_tree(const ClusterTree& tree);

/// How the tensor for the next level is formed from a cluster.
enum class NextLevelInput {
  /// The cluster's own rank-one tensor (outer product of its supports).
  rank_one,
  /// The entries of the tensor the cluster was extracted from where the
  /// cluster's strength product exceeds the sum over its siblings.
  restricted,
};

std::string_view to_string(NextLevelInput n);
NextLevelInput next_level_from_string(std::string_view s);

struct RecTenParams {
  double epsilon = 6.0;
  double k = 15.0;
  double lambda = 0.8;
  std::size_t r_max = 10;
  double cc_threshold = 50.0;
  std::uint64_t seed = 42;
  int max_depth = 10;
  int max_sweeps = 100;
  double rel_tol = 1e-6;
  NextLevelInput next_level = NextLevelInput::rank_one;

  /// Throws std::invalid_argument.
  void validate() const;
};

/// One cluster per component whose three supports are non-empty. Supports are
/// in model coordinates; ids are left at 0 for the caller to assign.
std::vector<Cluster> extract_clusters(const CpModel& model, int level, ClusterId parent);

/// Outer product of the supports over `dims`.
SparseTensor3 cluster_to_tensor(const Cluster& c, const Dims& dims);

/// Number of entries removed from a tensor with `nnz` entries: ceil(eps * nnz / 100),
/// capped at nnz - 1.
std::size_t deletion_count(double epsilon, std::size_t nnz);

/// Remove deletion_count(epsilon, nnz) entries, drawn one at a time without
/// replacement with probability proportional to 1 / value.
SparseTensor3 perturb(const SparseTensor3& t, double epsilon, Rng& rng);

/// As perturb, but the draw probability of entry n is proportional to 1 / weights[n].
SparseTensor3 perturb_weighted(const SparseTensor3& t, std::span<const double> weights, double epsilon, Rng& rng);

/// Termination condition 1: n(x) * 100 / mean(n(siblings)) < k. False without siblings.
bool too_small(const Cluster& candidate, std::span<const Cluster> siblings, double k);
bool too_small(std::uint64_t candidate_nnz, std::span<const std::uint64_t> sibling_nnz, double k);

/// Per-run diagnostics.
struct RunStats {
  std::size_t rank_estimates = 0;
  std::size_t decompositions = 0;
  std::size_t root_rank = 0;
};

/// Recursive hierarchical decomposition, processed level by level.
ClusterTree recten_run(const SparseTensor3& t, const RecTenParams& params, RunStats* stats = nullptr);

}  // namespace recten

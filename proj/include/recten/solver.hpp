#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "recten/tensor.hpp"

namespace recten {

/// State handed to SolverOptions::on_sweep after every completed sweep.
struct SweepReport {
  int sweep = 0;
  double objective = 0.0;
  const std::array<Matrix, 3>* factors = nullptr;
};

struct SolverOptions {
  int max_sweeps = 100;
  double rel_tol = 1e-6;
  double lambda = 0.8;
  std::uint64_t seed = 0;
  double min_col_norm = 1e-12;
  /// Optional per-sweep hook (tracing, invariant checks).
  std::function<void(const SweepReport&)> on_sweep;

  void validate() const;
};

struct CpFit {
  CpModel model;
  /// Objective after initialization (index 0) and after each sweep.
  std::vector<double> trace;
  int sweeps = 0;
  bool converged = false;
};

/// Non-negative CP with an L1 penalty, minimized by column-wise HALS:
/// each column update a_r <- max(0, (w_r - lambda/2) / gamma_r) is the exact
/// minimizer of the objective in that column, so the objective never increases
/// and small entries become exact zeros.
/// Starts from U(0.1, 1.1) factors rescaled to the data's norm; if that run
/// ends with every component zero (lambda > 0), a second run starts from
/// components seeded on sampled data cells and the lower objective wins.
/// Throws std::invalid_argument for an empty tensor or rank 0.
CpFit nncp_als_l1(const SparseTensor3& t, std::size_t rank, const SolverOptions& opts);

/// Generalized KL divergence sum over all cells of x log(x/d) - x + d.
double kl_divergence(const SparseTensor3& t, const std::array<Matrix, 3>& factors);

/// Poisson (KL) CP fitted by multiplicative updates. At most 200 sweeps.
CpFit cp_apr(const SparseTensor3& t, std::size_t rank, const SolverOptions& opts);

/// Thrown by corcondia when a factor is numerically rank deficient.
class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorcondiaReport {
  std::size_t rank = 0;
  /// Least-squares core, row-major as core[(p * R + q) * R + s].
  std::vector<double> core;
  double score = 0.0;

  double at(std::size_t p, std::size_t q, std::size_t s) const { return core[(p * rank + q) * rank + s]; }
};

/// Core consistency of `model` on `t`. Component scales are balanced across
/// the three modes before the core is formed. Rank 1 scores 100.
CorcondiaReport corcondia(const SparseTensor3& t, const CpModel& model);

struct RankEstimate {
  std::size_t rank_als = 1;
  std::size_t rank_apr = 1;
  std::size_t rank = 1;
  /// scores_*[r - 1] is the CC value at rank r (-inf when the fit failed).
  std::vector<double> scores_als;
  std::vector<double> scores_apr;
};

/// Fit ranks 1..r_max with both solver families (L1 ALS at lambda = 0 and KL
/// CP), keep the largest rank whose CC reaches cc_threshold in each family and
/// return the larger of the two. Ranks above the smallest tensor dimension
/// cannot give full-column-rank factors and are scored -inf without fitting.
RankEstimate estimate_rank(const SparseTensor3& t, std::size_t r_max, double cc_threshold,
                           const SolverOptions& opts);

inline constexpr double kFailedScore = -std::numeric_limits<double>::infinity();

}  // namespace recten

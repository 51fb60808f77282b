#include "recten/solver.hpp"

#include <algorithm>
#include <cmath>

#include "recten/parallel.hpp"
#include "recten/rng.hpp"

namespace recten {

namespace {

constexpr int kMaxRevivals = 3;
constexpr int kAprSweepCap = 200;
constexpr double kAprFloor = 1e-12;

std::array<Matrix, 3> random_factors(const Dims& dims, std::size_t rank, Rng& rng) {
  std::array<Matrix, 3> f;
  for (std::size_t m = 0; m < 3; ++m) {
    f[m].resize(static_cast<Eigen::Index>(dims[m]), static_cast<Eigen::Index>(rank));
    for (Eigen::Index c = 0; c < f[m].cols(); ++c)
      for (Eigen::Index r = 0; r < f[m].rows(); ++r) f[m](r, c) = rng.uniform(0.1, 1.1);
  }
  return f;
}

// Seed component r from one nonzero cell (i, j, k), drawn with probability
// proportional to `cum` increments: the actors seen on j, and the objects and weeks
// of actor i. On sparse block data this lands close to the block the cell
// belongs to, where a dense random start would be shrunk to zero.
void seed_from_cell(const SparseTensor3& t, std::array<Matrix, 3>& f, Eigen::Index r, Rng& rng,
                    const std::vector<double>& cum) {
  const auto entries = t.entries();
  const double u = rng.uniform() * cum.back();
  const std::size_t n = std::min<std::size_t>(
      static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()), entries.size() - 1);
  const auto& seed = entries[n].idx;
  for (auto& m : f) m.col(r).setZero();
  for (const auto& e : entries) {
    if (e.idx[1] == seed[1]) f[0](e.idx[0], r) += e.value;
    if (e.idx[0] == seed[0]) {
      f[1](e.idx[1], r) += e.value;
      f[2](e.idx[2], r) += e.value;
    }
  }
}

// Sampling weights for seed cells: value times the entry counts of the cell's
// actor and object fibers, so cells inside dense blocks are favoured over
// isolated ones.
std::vector<double> cumulative_values(const SparseTensor3& t) {
  std::array<std::vector<double>, 2> deg;
  for (std::size_t m = 0; m < 2; ++m) deg[m].assign(t.dims()[m], 0.0);
  for (const auto& e : t.entries()) {
    deg[0][e.idx[0]] += 1.0;
    deg[1][e.idx[1]] += 1.0;
  }
  std::vector<double> cum;
  cum.reserve(t.nnz());
  double s = 0.0;
  for (const auto& e : t.entries()) cum.push_back(s += e.value * deg[0][e.idx[0]] * deg[1][e.idx[1]]);
  return cum;
}

// Rescale random factors so the initial model has the data's Frobenius norm;
// a model far larger than the data drives most columns to zero in the first
// L1-shrunk sweep.
void match_norm(std::array<Matrix, 3>& f, double x_sq) {
  const double model_sq = (gram(f[0]).cwiseProduct(gram(f[1])).cwiseProduct(gram(f[2]))).sum();
  if (!(model_sq > 0.0) || !(x_sq > 0.0)) return;
  const double g = std::cbrt(std::sqrt(x_sq / model_sq));
  for (auto& m : f) m *= g;
}

// Same for the KL fit, matching total mass instead.
void match_mass(std::array<Matrix, 3>& f, double x_sum) {
  const double model_sum =
      f[0].colwise().sum().cwiseProduct(f[1].colwise().sum()).cwiseProduct(f[2].colwise().sum()).sum();
  if (!(model_sum > 0.0) || !(x_sum > 0.0)) return;
  const double g = std::cbrt(x_sum / model_sum);
  for (auto& m : f) m *= g;
}

void check_problem(const SparseTensor3& t, std::size_t rank) {
  if (t.empty()) throw std::invalid_argument("cannot decompose an empty tensor");
  if (rank == 0) throw std::invalid_argument("rank must be at least 1");
}

// Zero every column of component r; a component with any vanished column
// reconstructs nothing, so only its L1 cost remains.
void kill_component(std::array<Matrix, 3>& f, Eigen::Index r) {
  for (auto& m : f) m.col(r).setZero();
}

bool is_dead(const std::array<Matrix, 3>& f, Eigen::Index r, double min_norm) {
  for (const auto& m : f)
    if (m.col(r).norm() < min_norm) return true;
  return false;
}

// Re-seed modes B and C of a dead component and solve A in closed form. The
// new component is kept only if it strictly lowers the objective, which keeps
// the sweep sequence monotone.
bool try_revive(const SparseTensor3& t, std::array<Matrix, 3>& f, Eigen::Index r, double lambda, Rng& rng) {
  for (std::size_t m = 1; m < 3; ++m)
    for (Eigen::Index i = 0; i < f[m].rows(); ++i) f[m](i, r) = rng.uniform(0.1, 1.1);
  f[0].col(r).setZero();

  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(f[0].rows());
  for (const auto& e : t.entries())
    m0(e.idx[0]) += e.value * f[1](e.idx[1], r) * f[2](e.idx[2], r);
  const Eigen::VectorXd h =
      (f[1].transpose() * f[1].col(r)).cwiseProduct(f[2].transpose() * f[2].col(r));
  const double gamma = h(r);
  const Eigen::VectorXd w = m0 - f[0] * h;
  const Eigen::VectorXd a = ((w.array() - lambda / 2.0) / gamma).max(0.0).matrix();
  const double gain = gamma * a.squaredNorm() - lambda * (f[1].col(r).sum() + f[2].col(r).sum());
  if (gain > 0.0 && a.norm() > 0.0) {
    f[0].col(r) = a;
    return true;
  }
  kill_component(f, r);
  return false;
}

// M(i,r) for entry values replaced by `vals`.
Matrix mttkrp_values(const SparseTensor3& t, const std::vector<double>& vals, const std::array<Matrix, 3>& f,
                     std::size_t mode) {
  const std::size_t m1 = mode == 0 ? 1 : 0;
  const std::size_t m2 = mode == 2 ? 1 : 2;
  const Eigen::Index rank = f[0].cols();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> acc =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(f[mode].rows(), rank);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f1 = f[m1];
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f2 = f[m2];
  const auto entries = t.entries();
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto& e = entries[n];
    const double* r1 = f1.data() + static_cast<Eigen::Index>(e.idx[m1]) * rank;
    const double* r2 = f2.data() + static_cast<Eigen::Index>(e.idx[m2]) * rank;
    double* dst = acc.data() + static_cast<Eigen::Index>(e.idx[mode]) * rank;
    for (Eigen::Index r = 0; r < rank; ++r) dst[r] += vals[n] * r1[r] * r2[r];
  }
  return Matrix(acc);
}

std::vector<double> model_at_entries(const SparseTensor3& t, const std::array<Matrix, 3>& f) {
  const Eigen::Index rank = f[0].cols();
  std::vector<double> d;
  d.reserve(t.nnz());
  for (const auto& e : t.entries()) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < rank; ++r) s += f[0](e.idx[0], r) * f[1](e.idx[1], r) * f[2](e.idx[2], r);
    d.push_back(std::max(s, kAprFloor));
  }
  return d;
}

// One pass of column-wise updates over the three modes. Returns the mode-2
// MTTKRP, which the caller reuses for the objective.
Matrix hals_sweep(const SparseTensor3& t, std::array<Matrix, 3>& f, std::array<Matrix, 3>& grams, double lambda) {
  const Eigen::Index R = f[0].cols();
  Matrix last_m;
  for (std::size_t mode = 0; mode < 3; ++mode) {
    const std::size_t o1 = mode == 0 ? 1 : 0;
    const std::size_t o2 = mode == 2 ? 1 : 2;
    Matrix mk = mttkrp(t, f, mode);
    const Matrix h = hadamard_grams(grams[o1], grams[o2]);
    Matrix& u = f[mode];
    for (Eigen::Index r = 0; r < R; ++r) {
      const double gamma = h(r, r);
      if (!(gamma > 0.0)) {
        u.col(r).setZero();
        continue;
      }
      Eigen::VectorXd w = mk.col(r) - u * h.col(r) + u.col(r) * gamma;
      u.col(r) = ((w.array() - lambda / 2.0) / gamma).max(0.0).matrix();
    }
    grams[mode] = gram(u);
    if (mode == 2) last_m = std::move(mk);
  }
  return last_m;
}

bool converged(double prev, double cur, double rel_tol) {
  return prev - cur <= rel_tol * std::max(std::abs(prev), 1e-300);
}

}  // namespace

void SolverOptions::validate() const {
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be at least 1");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(min_col_norm >= 0.0)) throw std::invalid_argument("min_col_norm must be >= 0");
}

namespace {

CpFit hals_fit(const SparseTensor3& t, std::array<Matrix, 3> f, const SolverOptions& opts, Rng& rng) {
  const std::size_t rank = static_cast<std::size_t>(f[0].cols());
  const double lambda = opts.lambda;
  const double x_sq = t.frobenius_norm_sq();
  match_norm(f, x_sq);
  const auto R = static_cast<Eigen::Index>(rank);
  std::vector<int> revivals(rank, 0);

  std::array<Matrix, 3> grams{gram(f[0]), gram(f[1]), gram(f[2])};
  CpFit fit;
  fit.trace.push_back(objective(t, f, lambda));

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    for (Eigen::Index r = 0; r < R; ++r) {
      if (is_dead(f, r, opts.min_col_norm) && revivals[static_cast<std::size_t>(r)] < kMaxRevivals) {
        ++revivals[static_cast<std::size_t>(r)];
        try_revive(t, f, r, lambda, rng);
        for (std::size_t m = 0; m < 3; ++m) grams[m] = gram(f[m]);
      }
    }

    Matrix last_m = hals_sweep(t, f, grams, lambda);

    bool killed = false;
    for (Eigen::Index r = 0; r < R; ++r) {
      if (is_dead(f, r, opts.min_col_norm) && f[0].col(r).norm() + f[1].col(r).norm() + f[2].col(r).norm() > 0) {
        kill_component(f, r);
        killed = true;
      }
    }
    double obj;
    if (killed) {
      for (std::size_t m = 0; m < 3; ++m) grams[m] = gram(f[m]);
      obj = objective(t, f, lambda);
    } else {
      const double inner = last_m.cwiseProduct(f[2]).sum();
      const double model_sq = hadamard_grams(hadamard_grams(grams[0], grams[1]), grams[2]).sum();
      obj = x_sq - 2.0 * inner + model_sq + lambda * (f[0].sum() + f[1].sum() + f[2].sum());
    }
    const double prev = fit.trace.back();
    fit.trace.push_back(obj);
    fit.sweeps = sweep;
    if (opts.on_sweep) opts.on_sweep(SweepReport{sweep, obj, &f});
    if (converged(prev, obj, opts.rel_tol)) {
      fit.converged = true;
      break;
    }
  }
  fit.model = CpModel(std::move(f[0]), std::move(f[1]), std::move(f[2]));
  return fit;
}

bool all_zero(const CpModel& m) {
  for (std::size_t mode = 0; mode < 3; ++mode)
    if (m.factor(mode).cwiseAbs().maxCoeff() > 0.0) return false;
  return true;
}

}  // namespace

CpFit nncp_als_l1(const SparseTensor3& t, std::size_t rank, const SolverOptions& opts) {
  check_problem(t, rank);
  opts.validate();
  Rng rng(opts.seed);
  auto fit = hals_fit(t, random_factors(t.dims(), rank, rng), opts, rng);
  if (opts.lambda > 0.0 && all_zero(fit.model)) {
    // On a large sparse tensor a dense random start has every w_r below
    // lambda/2, so the first shrunk sweep zeroes everything. Retry from
    // components seeded on data cells and keep the better fit.
    std::array<Matrix, 3> f;
    for (std::size_t m = 0; m < 3; ++m) f[m] = Matrix::Zero(static_cast<Eigen::Index>(t.dims()[m]), static_cast<Eigen::Index>(rank));
    const auto cum = cumulative_values(t);
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(rank); ++r) seed_from_cell(t, f, r, rng, cum);
    auto seeded = hals_fit(t, std::move(f), opts, rng);
    if (seeded.trace.back() < fit.trace.back()) return seeded;
  }
  return fit;
}

double kl_divergence(const SparseTensor3& t, const std::array<Matrix, 3>& f) {
  const auto d = model_at_entries(t, f);
  double s = 0.0;
  const auto entries = t.entries();
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const double x = entries[n].value;
    s += x * std::log(x / d[n]) - x;
  }
  const Eigen::RowVectorXd total = f[0].colwise().sum().cwiseProduct(f[1].colwise().sum()).cwiseProduct(
      f[2].colwise().sum());
  return s + total.sum();
}

CpFit cp_apr(const SparseTensor3& t, std::size_t rank, const SolverOptions& opts) {
  check_problem(t, rank);
  opts.validate();
  Rng rng(opts.seed);
  auto f = random_factors(t.dims(), rank, rng);
  double x_sum = 0.0;
  for (const auto& e : t.entries()) x_sum += e.value;
  match_mass(f, x_sum);
  const auto R = static_cast<Eigen::Index>(rank);
  const int max_sweeps = std::min(opts.max_sweeps, kAprSweepCap);

  CpFit fit;
  fit.trace.push_back(kl_divergence(t, f));
  const auto entries = t.entries();
  std::vector<double> ratio(entries.size());
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (std::size_t mode = 0; mode < 3; ++mode) {
      const std::size_t o1 = mode == 0 ? 1 : 0;
      const std::size_t o2 = mode == 2 ? 1 : 2;
      const auto d = model_at_entries(t, f);
      for (std::size_t n = 0; n < entries.size(); ++n) ratio[n] = entries[n].value / d[n];
      const Matrix phi = mttkrp_values(t, ratio, f, mode);
      const Eigen::RowVectorXd denom = f[o1].colwise().sum().cwiseProduct(f[o2].colwise().sum());
      for (Eigen::Index r = 0; r < R; ++r) {
        if (!(denom(r) > 0.0)) continue;
        f[mode].col(r) = f[mode].col(r).cwiseProduct(phi.col(r)) / denom(r);
      }
    }
    const double kl = kl_divergence(t, f);
    const double prev = fit.trace.back();
    fit.trace.push_back(kl);
    fit.sweeps = sweep;
    if (opts.on_sweep) opts.on_sweep(SweepReport{sweep, kl, &f});
    if (converged(prev, kl, opts.rel_tol)) {
      fit.converged = true;
      break;
    }
  }
  fit.model = CpModel(std::move(f[0]), std::move(f[1]), std::move(f[2]));
  return fit;
}

RankEstimate estimate_rank(const SparseTensor3& t, std::size_t r_max, double cc_threshold,
                           const SolverOptions& opts) {
  if (r_max == 0) throw std::invalid_argument("r_max must be at least 1");
  if (!(cc_threshold > 0.0 && cc_threshold <= 100.0)) throw std::invalid_argument("cc_threshold must be in (0, 100]");
  if (t.empty()) throw std::invalid_argument("cannot estimate the rank of an empty tensor");
  const auto& d = t.dims();
  const std::size_t feasible = std::min({d[0], d[1], d[2], r_max});

  RankEstimate est;
  est.scores_als.assign(r_max, kFailedScore);
  est.scores_apr.assign(r_max, kFailedScore);
  est.scores_als[0] = est.scores_apr[0] = 100.0;

  // Task n covers family n % 2 at rank n / 2 + 2.
  const std::size_t tasks = feasible > 1 ? 2 * (feasible - 1) : 0;
  std::vector<double> scores(tasks, kFailedScore);
  parallel_for(tasks, [&](std::size_t n) {
    const std::size_t family = n % 2;
    const std::size_t r = n / 2 + 2;
    SolverOptions o = opts;
    o.on_sweep = nullptr;
    o.seed = derive_seed(opts.seed, {0x72616e6bULL, family, r});
    try {
      if (family == 0) {
        o.lambda = 0.0;
        scores[n] = corcondia(t, nncp_als_l1(t, r, o).model).score;
      } else {
        o.max_sweeps = kAprSweepCap;
        scores[n] = corcondia(t, cp_apr(t, r, o).model).score;
      }
    } catch (const std::exception&) {
      scores[n] = kFailedScore;
    }
    if (!std::isfinite(scores[n])) scores[n] = kFailedScore;
  });
  for (std::size_t n = 0; n < tasks; ++n) {
    auto& dst = n % 2 == 0 ? est.scores_als : est.scores_apr;
    dst[n / 2 + 1] = scores[n];
  }
  for (std::size_t r = 1; r <= r_max; ++r) {
    if (est.scores_als[r - 1] >= cc_threshold) est.rank_als = r;
    if (est.scores_apr[r - 1] >= cc_threshold) est.rank_apr = r;
  }
  est.rank = std::max(est.rank_als, est.rank_apr);
  return est;
}

}  // namespace recten

#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "recten/solver.hpp"

namespace recten {

namespace {

constexpr double kPinvCutoff = 1e-10;

// Moore-Penrose inverse of a tall factor; refuses numerically rank deficient input.
Matrix checked_pinv(const Matrix& f, const char* name) {
  if (f.rows() < f.cols()) {
    throw RankDeficientError(std::string("factor ") + name + " has fewer rows than components");
  }
  Eigen::BDCSVD<Matrix> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  if (!(smax > 0.0) || sv(sv.size() - 1) < kPinvCutoff * smax) {
    throw RankDeficientError(std::string("factor ") + name + " is numerically rank deficient");
  }
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

CorcondiaReport corcondia(const SparseTensor3& t, const CpModel& model) {
  const std::size_t rank = model.rank();
  if (rank == 0) throw std::invalid_argument("corcondia needs at least one component");
  if (model.dims() != t.dims()) throw std::invalid_argument("model dims do not match tensor");

  CorcondiaReport rep;
  rep.rank = rank;
  if (rank == 1) {
    rep.core = {1.0};
    rep.score = 100.0;
    return rep;
  }

  // Spread each component's magnitude evenly over its three columns.
  std::array<Matrix, 3> f = model.factors();
  const auto R = static_cast<Eigen::Index>(rank);
  for (Eigen::Index r = 0; r < R; ++r) {
    const double n0 = f[0].col(r).norm(), n1 = f[1].col(r).norm(), n2 = f[2].col(r).norm();
    if (!(n0 > 0.0 && n1 > 0.0 && n2 > 0.0)) throw RankDeficientError("component has a zero column");
    const double g = std::cbrt(n0 * n1 * n2);
    f[0].col(r) *= g / n0;
    f[1].col(r) *= g / n1;
    f[2].col(r) *= g / n2;
  }
  const Matrix pa = checked_pinv(f[0], "A");
  const Matrix pb = checked_pinv(f[1], "B");
  const Matrix pc = checked_pinv(f[2], "C");

  // y[k] = sum over entries in slice k of x * pa(:, i) pb(:, j)^T.
  const std::size_t kdim = t.dims()[2];
  std::vector<Matrix> y(kdim);
  for (const auto& e : t.entries()) {
    auto& slab = y[e.idx[2]];
    if (slab.size() == 0) slab = Matrix::Zero(R, R);
    slab.noalias() += e.value * pa.col(e.idx[0]) * pb.col(e.idx[1]).transpose();
  }
  rep.core.assign(rank * rank * rank, 0.0);
  for (std::size_t k = 0; k < kdim; ++k) {
    if (y[k].size() == 0) continue;
    for (Eigen::Index p = 0; p < R; ++p)
      for (Eigen::Index q = 0; q < R; ++q) {
        const double v = y[k](p, q);
        if (v == 0.0) continue;
        double* dst = rep.core.data() + (static_cast<std::size_t>(p) * rank + static_cast<std::size_t>(q)) * rank;
        for (Eigen::Index s = 0; s < R; ++s) dst[s] += v * pc(s, static_cast<Eigen::Index>(k));
      }
  }
  double err = 0.0;
  for (std::size_t p = 0; p < rank; ++p)
    for (std::size_t q = 0; q < rank; ++q)
      for (std::size_t s = 0; s < rank; ++s) {
        const double target = (p == q && q == s) ? 1.0 : 0.0;
        const double dlt = rep.at(p, q, s) - target;
        err += dlt * dlt;
      }
  rep.score = 100.0 * (1.0 - err / static_cast<double>(rank));
  return rep;
}

}  // namespace recten

#include "recten/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace recten {

namespace {

void check_factor(const Matrix& f, const char* name) {
  for (Eigen::Index c = 0; c < f.cols(); ++c) {
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      const double v = f(r, c);
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument(std::string("factor ") + name +
                                    " has a negative or non-finite value");
      }
    }
  }
}

void check_match(const SparseTensor3& t, const std::array<Matrix, 3>& factors) {
  const auto& d = t.dims();
  for (std::size_t m = 0; m < 3; ++m) {
    if (static_cast<std::size_t>(factors[m].rows()) != d[m]) {
      throw std::invalid_argument("factor " + std::to_string(m) + " has " +
                                  std::to_string(factors[m].rows()) + " rows, tensor mode has " +
                                  std::to_string(d[m]));
    }
  }
  if (factors[1].cols() != factors[0].cols() || factors[2].cols() != factors[0].cols()) {
    throw std::invalid_argument("factor column counts differ");
  }
}

}  // namespace

SparseTensor3 SparseTensor3::from_coo(const Dims& dims, std::vector<Entry> raw) {
  for (std::size_t m = 0; m < 3; ++m) {
    if (dims[m] == 0) throw std::invalid_argument("tensor dimension " + std::to_string(m) + " is zero");
    if (dims[m] > std::size_t{0xffffffffu}) throw std::invalid_argument("tensor dimension too large");
  }
  for (const auto& e : raw) {
    for (std::size_t m = 0; m < 3; ++m) {
      if (e.idx[m] >= dims[m]) {
        throw std::invalid_argument("coordinate (" + std::to_string(e.idx[0]) + "," +
                                    std::to_string(e.idx[1]) + "," + std::to_string(e.idx[2]) +
                                    ") out of range");
      }
    }
    if (!std::isfinite(e.value) || e.value < 0.0) {
      throw std::invalid_argument("tensor value must be finite and non-negative");
    }
  }

  std::sort(raw.begin(), raw.end(), [](const Entry& x, const Entry& y) { return x.idx < y.idx; });

  SparseTensor3 t;
  t.dims_ = dims;
  t.entries_.reserve(raw.size());
  for (const auto& e : raw) {
    if (!t.entries_.empty() && t.entries_.back().idx == e.idx) {
      t.entries_.back().value += e.value;
    } else {
      t.entries_.push_back(e);
    }
  }
  std::erase_if(t.entries_, [](const Entry& e) { return e.value == 0.0; });
  t.entries_.shrink_to_fit();
  return t;
}

double SparseTensor3::frobenius_norm_sq() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.value * e.value;
  return s;
}

double SparseTensor3::sum() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.value;
  return s;
}

CpModel::CpModel(Matrix a, Matrix b, Matrix c) : factors_{std::move(a), std::move(b), std::move(c)} {
  if (factors_[1].cols() != factors_[0].cols() || factors_[2].cols() != factors_[0].cols()) {
    throw std::invalid_argument("factor column counts differ");
  }
  check_factor(factors_[0], "A");
  check_factor(factors_[1], "B");
  check_factor(factors_[2], "C");
}

CpModel CpModel::zeros(const Dims& dims, std::size_t rank) {
  const auto r = static_cast<Eigen::Index>(rank);
  return CpModel(Matrix::Zero(static_cast<Eigen::Index>(dims[0]), r),
                 Matrix::Zero(static_cast<Eigen::Index>(dims[1]), r),
                 Matrix::Zero(static_cast<Eigen::Index>(dims[2]), r));
}

Dims CpModel::dims() const {
  return {static_cast<std::size_t>(factors_[0].rows()), static_cast<std::size_t>(factors_[1].rows()),
          static_cast<std::size_t>(factors_[2].rows())};
}

double CpModel::value(std::size_t i, std::size_t j, std::size_t k) const {
  const auto d = dims();
  if (i >= d[0] || j >= d[1] || k >= d[2]) throw std::out_of_range("reconstruct_value index out of range");
  const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j),
             kk = static_cast<Eigen::Index>(k);
  double s = 0.0;
  for (Eigen::Index r = 0; r < factors_[0].cols(); ++r) {
    s += factors_[0](ii, r) * factors_[1](jj, r) * factors_[2](kk, r);
  }
  return s;
}

bool operator==(const CpModel& x, const CpModel& y) {
  for (std::size_t m = 0; m < 3; ++m) {
    if (x.factors_[m].rows() != y.factors_[m].rows() || x.factors_[m].cols() != y.factors_[m].cols())
      return false;
    if (x.factors_[m] != y.factors_[m]) return false;
  }
  return true;
}

Matrix mttkrp(const SparseTensor3& t, const std::array<Matrix, 3>& factors, std::size_t mode) {
  if (mode > 2) throw std::invalid_argument("mode must be 0, 1 or 2");
  check_match(t, factors);
  const std::size_t m1 = mode == 0 ? 1 : 0;
  const std::size_t m2 = mode == 2 ? 1 : 2;
  const Eigen::Index rank = factors[0].cols();
  Matrix out = Matrix::Zero(factors[mode].rows(), rank);
  // Row-major copies keep the per-entry rank loop contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f1 = factors[m1];
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f2 = factors[m2];
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> acc =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(out.rows(), rank);
  for (const auto& e : t.entries()) {
    const double* r1 = f1.data() + static_cast<Eigen::Index>(e.idx[m1]) * rank;
    const double* r2 = f2.data() + static_cast<Eigen::Index>(e.idx[m2]) * rank;
    double* dst = acc.data() + static_cast<Eigen::Index>(e.idx[mode]) * rank;
    for (Eigen::Index r = 0; r < rank; ++r) dst[r] += e.value * r1[r] * r2[r];
  }
  out = acc;
  return out;
}

Matrix mttkrp(const SparseTensor3& t, const CpModel& model, std::size_t mode) {
  return mttkrp(t, model.factors(), mode);
}

Matrix gram(const Matrix& f) { return f.transpose() * f; }

Matrix hadamard_grams(const Matrix& g1, const Matrix& g2) {
  if (g1.rows() != g2.rows() || g1.cols() != g2.cols()) {
    throw std::invalid_argument("hadamard_grams shape mismatch");
  }
  return g1.cwiseProduct(g2);
}

double reconstruct_value(const CpModel& model, std::size_t i, std::size_t j, std::size_t k) {
  return model.value(i, j, k);
}

double objective(const SparseTensor3& t, const std::array<Matrix, 3>& factors, double lambda) {
  check_match(t, factors);
  const Matrix m = mttkrp(t, factors, 0);
  const double inner = m.cwiseProduct(factors[0]).sum();
  const double model_sq =
      hadamard_grams(hadamard_grams(gram(factors[0]), gram(factors[1])), gram(factors[2])).sum();
  const double l1 = factors[0].sum() + factors[1].sum() + factors[2].sum();
  return t.frobenius_norm_sq() - 2.0 * inner + model_sq + lambda * l1;
}

double objective(const SparseTensor3& t, const CpModel& model, double lambda) {
  return objective(t, model.factors(), lambda);
}

}  // namespace recten

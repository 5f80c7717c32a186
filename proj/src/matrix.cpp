#include "attnshap/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attnshap {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw std::invalid_argument("Matrix: ragged initializer list");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Matrix::check_finite(const std::string& what) const {
  if (!all_finite()) {
    throw std::invalid_argument(what + ": non-finite entry");
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        orow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

Matrix transposed(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(j, i) = m(i, j);
    }
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("hadamard: shape mismatch");
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] *= b.data()[i];
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("add: shape mismatch");
  }
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    a.data()[i] += b.data()[i];
  }
}

void scale_inplace(Matrix& m, double c) {
  for (double& v : m.data()) v *= c;
}

Matrix scaled(const Matrix& m, double c) {
  Matrix out = m;
  scale_inplace(out, c);
  return out;
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::fabs(v));
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double best = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    best = std::max(best, std::fabs(a.data()[i] - b.data()[i]));
  }
  return best;
}

Matrix softmax_rows(const Matrix& m) {
  m.check_finite("softmax_rows input");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* in = m.row_ptr(i);
    double* o = out.row_ptr(i);
    double mx = in[0];
    for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < m.cols(); ++j) o[j] /= sum;
  }
  return out;
}

std::vector<double> softmax(const std::vector<double>& v) {
  if (v.empty()) {
    throw std::invalid_argument("softmax: empty input");
  }
  Matrix row(1, v.size());
  std::copy(v.begin(), v.end(), row.data().begin());
  Matrix sm = softmax_rows(row);
  return sm.data();
}

}  // namespace attnshap

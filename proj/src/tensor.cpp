#include "focal/tensor.hpp"

#include <cmath>

#include "focal/errors.hpp"

namespace focal {

Tensor Tensor::full(std::size_t rows, std::size_t cols, double v) {
  Tensor t(rows, cols);
  for (double& x : t.data_) x = v;
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t(1, 1);
  t[0] = v;
  return t;
}

Tensor Tensor::column(std::vector<double> values) {
  Tensor t;
  t.rows_ = values.size();
  t.cols_ = 1;
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.rows_ = 1;
  t.cols_ = values.size();
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Tensor t(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != t.cols_) throw shape_error("from_rows: ragged row lengths");
    std::size_t c = 0;
    for (double v : row) t.at(r, c++) = v;
    ++r;
  }
  return t;
}

std::string Tensor::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw shape_error("matmul: inner dims differ: " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row_ptr(i);
    double* oi = out.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) oi[j] += aip * bp[j];
    }
  }
  return out;
}

double dot(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size())
    throw shape_error("dot: sizes differ: " + u.shape_str() + " vs " + v.shape_str());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm2(const Tensor& u) { return u.frobenius_norm(); }

double cosine(const Tensor& u, const Tensor& v) {
  const double nu = norm2(u), nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) throw numeric_error("cosine: zero vector");
  double c = dot(u, v) / (nu * nv);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

}  // namespace focal

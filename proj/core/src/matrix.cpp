#include "perfgat/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "perfgat/errors.hpp"

namespace perfgat::num {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged initializer rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix Vector::as_column() const {
  return Matrix(len(), 1, std::vector<double>(data_.begin(), data_.end()));
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> xs, const std::string& what) {
  if (!all_finite(xs)) throw NumericError("non-finite values in " + what);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}
}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

Vector softmax(const Vector& v) {
  if (v.len() == 0) throw DomainError("softmax of empty vector");
  require_finite(v.data(), "softmax input");
  double mx = v[0];
  for (std::size_t i = 1; i < v.len(); ++i) mx = std::max(mx, v[i]);
  Vector out(v.len());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.len(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < v.len(); ++i) out[i] /= sum;
  return out;
}

double leaky_relu(double x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw DomainError("leaky_relu slope must lie in (0,1), got " + std::to_string(slope));
  }
  return x >= 0.0 ? x : slope * x;
}

double dot(const Vector& a, const Vector& b) {
  if (a.len() != b.len()) {
    throw DimensionError("dot length mismatch: " + std::to_string(a.len()) + " vs " +
                         std::to_string(b.len()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.len(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw DomainError("cosine_similarity of zero-norm vector");
  }
  const double c = dot(a, b) / (na * nb);
  // Clamp the inevitable last-ulp excursions.
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace perfgat::num

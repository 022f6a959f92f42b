#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace perfgat::num {

// Dense row-major float64 matrix. The workhorse value type of the library:
// node features, correlation matrices, weights and embeddings all live here.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Dense float64 vector.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len) : data_(len, 0.0) {}
  explicit Vector(std::vector<double> data) : data_(std::move(data)) {}
  Vector(std::initializer_list<double> v) : data_(v) {}

  std::size_t len() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Column-matrix view of this vector (len x 1).
  Matrix as_column() const;

  friend bool operator==(const Vector& a, const Vector& b) { return a.data_ == b.data_; }

 private:
  std::vector<double> data_;
};

bool all_finite(std::span<const double> xs);
// Throws NumericError mentioning `what` when xs holds a NaN/Inf.
void require_finite(std::span<const double> xs, const std::string& what);

// Standard product. Dimension mismatch throws DimensionError naming both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// Max-subtracted softmax; empty input throws DomainError.
Vector softmax(const Vector& v);

// x for x >= 0, slope*x otherwise. slope must lie in (0, 1).
double leaky_relu(double x, double slope);

// Cosine of the angle between a and b; zero-norm inputs throw DomainError.
double cosine_similarity(const Vector& a, const Vector& b);

double dot(const Vector& a, const Vector& b);
double norm(const Vector& a);

}  // namespace perfgat::num

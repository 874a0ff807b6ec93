#pragma once

// Dense double-precision matrix/vector types and the factorizations the
// equilibrium solvers rely on. Storage is row-major and contiguous.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcn {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyMatrixError : public Error {
 public:
  using Error::Error;
};

class DefinitenessError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  // Validates that every entry is finite.
  explicit Vector(std::vector<double> values);
  Vector(std::initializer_list<double> values);

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  const std::vector<double>& values() const { return data_; }

  Vector& operator+=(const Vector& o);
  Vector& operator-=(const Vector& o);
  Vector& operator*=(double s);

  bool operator==(const Vector& o) const = default;

 private:
  std::vector<double> data_;
};

Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator*(double s, Vector v);
Vector hadamard(const Vector& a, const Vector& b);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
double norm_inf(const Vector& v);
bool all_finite(std::span<const double> values);

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // Row-major entries; length must equal rows*cols and all must be finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  // Nested-list literal, one inner list per row.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(const Vector& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_square() const { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix m);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, const Vector& x);
// aᵀ x without forming the transpose.
Vector transpose_times(const Matrix& a, const Vector& x);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool is_symmetric(const Matrix& m, double tol = 1e-10);

// Moore–Penrose pseudoinverse via SVD. Singular values below
// tol * sigma_max are treated as zero.
Matrix pseudoinverse(const Matrix& m, double tol = 1e-12);

// Solves a x = b for symmetric positive-definite a by Cholesky.
// Throws DefinitenessError when the factorization breaks down.
Vector solve_spd(const Matrix& a, const Vector& b);

// Solves a x = b for general square a by partially pivoted LU.
// Throws SingularMatrixError when a is numerically singular.
Vector solve_general(const Matrix& a, const Vector& b);
Matrix solve_general(const Matrix& a, const Matrix& b);

// exp(m * t) by scaling and squaring with a Padé approximant.
Matrix matrix_exponential(const Matrix& m, double t);

double min_eigenvalue_symmetric(const Matrix& m);
double max_eigenvalue_symmetric(const Matrix& m);

}  // namespace pcn

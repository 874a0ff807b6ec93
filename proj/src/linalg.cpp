#include "pcn/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcn/kernels.hpp"

namespace pcn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMap view(const Matrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

ConstVecMap view(const Vector& v) {
  return ConstVecMap(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix from_eigen(const RowMajor& e) {
  Matrix out(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  std::copy(e.data(), e.data() + e.size(), out.data());
  return out;
}

Vector from_eigen(const Eigen::VectorXd& e) {
  Vector out(static_cast<std::size_t>(e.size()));
  std::copy(e.data(), e.data() + e.size(), out.data());
  return out;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

void require_same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

void require_square(const Matrix& m, const char* what) {
  if (!m.is_square()) {
    throw ShapeError(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected square");
  }
}

}  // namespace

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------- Vector

Vector::Vector(std::vector<double> values) : data_(std::move(values)) {
  if (!all_finite(data_)) throw NonFiniteError("Vector: non-finite entry");
}

Vector::Vector(std::initializer_list<double> values) : Vector(std::vector<double>(values)) {}

Vector& Vector::operator+=(const Vector& o) {
  require_same_size(*this, o, "Vector +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Vector& Vector::operator-=(const Vector& o) {
  require_same_size(*this, o, "Vector -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Vector& Vector::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Vector operator+(Vector a, const Vector& b) { return a += b; }
Vector operator-(Vector a, const Vector& b) { return a -= b; }
Vector operator*(double s, Vector v) { return v *= s; }

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_size(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double dot(const Vector& a, const Vector& b) {
  require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------- Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: " + std::to_string(data_.size()) + " entries for " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  if (!all_finite(data_)) throw NonFiniteError("Matrix: non-finite entry");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  if (!all_finite(data_)) throw NonFiniteError("Matrix: non-finite entry");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "Matrix +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "Matrix -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix m) { return m *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("Matrix product: inner dimensions " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  kernels::gemm(a.span(), b.span(), c.span(), a.rows(), a.cols(), b.cols());
  return c;
}

Vector operator*(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw ShapeError("Matrix-vector product: " + std::to_string(a.cols()) + " columns vs length " +
                     std::to_string(x.size()));
  }
  Vector y(a.rows());
  kernels::gemv(a.span(), a.rows(), a.cols(), x.span(), y.span());
  return y;
}

Vector transpose_times(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) {
    throw ShapeError("Transposed product: " + std::to_string(a.rows()) + " rows vs length " +
                     std::to_string(x.size()));
  }
  Vector y(a.cols());
  kernels::gemv_t(a.span(), a.rows(), a.cols(), x.span(), y.span());
  return y;
}

double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.span()) acc += v * v;
  return std::sqrt(acc);
}

double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.span()) r = std::max(r, std::abs(v));
  return r;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a.data()[i] - b.data()[i]));
  return r;
}

bool is_symmetric(const Matrix& m, double tol) {
  if (!m.is_square()) return false;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = r + 1; c < m.cols(); ++c)
      if (std::abs(m(r, c) - m(c, r)) > tol) return false;
  return true;
}

// ---------------------------------------------------------------- factorizations

Matrix pseudoinverse(const Matrix& m, double tol) {
  if (m.empty()) throw EmptyMatrixError("pseudoinverse: empty matrix");
  if (tol < 0.0) throw Error("pseudoinverse: negative tolerance");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(view(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = tol * (s.size() > 0 ? s(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  RowMajor p = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return from_eigen(p);
}

Vector solve_spd(const Matrix& a, const Vector& b) {
  require_square(a, "solve_spd");
  if (a.rows() != b.size()) throw ShapeError("solve_spd: rhs length mismatch");
  if (!is_symmetric(a, 1e-10)) throw ShapeError("solve_spd: matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(view(a));
  if (llt.info() != Eigen::Success) {
    throw DefinitenessError("solve_spd: matrix is not positive definite");
  }
  return from_eigen(Eigen::VectorXd(llt.solve(view(b))));
}

namespace {
Eigen::PartialPivLU<Eigen::MatrixXd> checked_lu(const Matrix& a) {
  require_square(a, "solve_general");
  if (a.empty()) throw EmptyMatrixError("solve_general: empty matrix");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(view(a));
  // PartialPivLU does not report singularity; inspect the pivots of U.
  const Eigen::MatrixXd& packed = lu.matrixLU();
  double umax = 0.0;
  double umin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    umax = std::max(umax, std::abs(packed(i, i)));
    umin = std::min(umin, std::abs(packed(i, i)));
  }
  if (!(umin > 1e-14 * umax)) throw SingularMatrixError("solve_general: matrix is singular");
  return lu;
}
}  // namespace

Vector solve_general(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size()) throw ShapeError("solve_general: rhs length mismatch");
  auto lu = checked_lu(a);
  return from_eigen(Eigen::VectorXd(lu.solve(view(b))));
}

Matrix solve_general(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("solve_general: rhs row mismatch");
  auto lu = checked_lu(a);
  RowMajor x = lu.solve(view(b));
  return from_eigen(x);
}

Matrix matrix_exponential(const Matrix& m, double t) {
  require_square(m, "matrix_exponential");
  if (m.empty()) return Matrix();
  Eigen::MatrixXd scaled = view(m) * t;
  RowMajor e = scaled.exp();
  return from_eigen(e);
}

namespace {
Eigen::VectorXd symmetric_eigenvalues(const Matrix& m, const char* what) {
  require_square(m, what);
  if (m.empty()) throw EmptyMatrixError(std::string(what) + ": empty matrix");
  if (!is_symmetric(m, 1e-10)) throw ShapeError(std::string(what) + ": matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(view(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}
}  // namespace

double min_eigenvalue_symmetric(const Matrix& m) {
  return symmetric_eigenvalues(m, "min_eigenvalue_symmetric").minCoeff();
}

double max_eigenvalue_symmetric(const Matrix& m) {
  return symmetric_eigenvalues(m, "max_eigenvalue_symmetric").maxCoeff();
}

}  // namespace pcn

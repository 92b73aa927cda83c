#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dgflow/error.hpp"

namespace dgflow {

template <class T>
struct BasicTriplet {
  std::size_t row;
  std::size_t col;
  T value;
};

/// Compressed row storage. Column indices strictly increase within a row.
template <class T>
class BasicSparseMatrix {
 public:
  BasicSparseMatrix() = default;
  BasicSparseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<std::size_t>& row_offsets() const { return offsets_; }
  const std::vector<std::size_t>& col_indices() const { return cols_idx_; }
  const std::vector<T>& values() const { return values_; }

  /// Zero when (i, j) is not stored.
  T at(std::size_t i, std::size_t j) const {
    const auto first = cols_idx_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
    const auto last = cols_idx_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    return (it != last && *it == j) ? values_[static_cast<std::size_t>(it - cols_idx_.begin())] : T(0);
  }

  template <class V>
  void multiply(std::span<const V> x, std::span<V> y) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      V s = 0;
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) s += static_cast<V>(values_[k]) * x[cols_idx_[k]];
      y[i] = s;
    }
  }
  std::vector<T> operator*(const std::vector<T>& x) const {
    std::vector<T> y(rows_);
    multiply<T>(x, y);
    return y;
  }

  T max_abs() const {
    T m = 0;
    for (const T& v : values_) m = std::max<T>(m, std::abs(v));
    return m;
  }

  /// Row-major dense copy; intended for small matrices and tests.
  std::vector<T> to_dense() const {
    std::vector<T> d(rows_ * cols_, T(0));
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) d[i * cols_ + cols_idx_[k]] = values_[k];
    return d;
  }

  BasicSparseMatrix transposed() const;

  template <class U>
  BasicSparseMatrix<U> cast() const {
    BasicSparseMatrix<U> out(rows_, cols_);
    out.offsets_ = offsets_;
    out.cols_idx_ = cols_idx_;
    out.values_.assign(values_.begin(), values_.end());
    return out;
  }

  template <class U>
  friend BasicSparseMatrix<U> assemble_basic(std::size_t, std::size_t, std::vector<BasicTriplet<U>>);
  template <class U>
  friend class BasicSparseMatrix;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> cols_idx_;
  std::vector<T> values_;
};

/// Sums duplicates. Triplets are sorted by (row, col, value) first so the result
/// does not depend on the order they were produced in.
template <class T>
BasicSparseMatrix<T> assemble_basic(std::size_t rows, std::size_t cols, std::vector<BasicTriplet<T>> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw InvalidArgument("triplet index out of range");
  }
  std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return a.value < b.value;
  });
  BasicSparseMatrix<T> m(rows, cols);
  for (std::size_t k = 0; k < triplets.size();) {
    const auto r = triplets[k].row;
    const auto c = triplets[k].col;
    T s = 0;
    for (; k < triplets.size() && triplets[k].row == r && triplets[k].col == c; ++k) s += triplets[k].value;
    m.cols_idx_.push_back(c);
    m.values_.push_back(s);
    ++m.offsets_[r + 1];
  }
  for (std::size_t i = 0; i < rows; ++i) m.offsets_[i + 1] += m.offsets_[i];
  return m;
}

template <class T>
BasicSparseMatrix<T> BasicSparseMatrix<T>::transposed() const {
  std::vector<BasicTriplet<T>> t;
  t.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) t.push_back({cols_idx_[k], i, values_[k]});
  return assemble_basic<T>(cols_, rows_, std::move(t));
}

using Triplet = BasicTriplet<double>;
using SparseMatrix = BasicSparseMatrix<double>;

inline SparseMatrix assemble(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  return assemble_basic<double>(rows, cols, std::move(triplets));
}

/// One `row col value` line per stored entry, 0-based.
void write_coordinate(std::ostream& out, const SparseMatrix& a);

/// Row-major dense matrix.
struct DenseMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// LU with partial pivoting. Throws SolverFailure on an exactly singular pivot.
class DenseLU {
 public:
  DenseLU() = default;
  explicit DenseLU(DenseMatrix a);
  std::size_t size() const { return lu_.rows; }
  void solve_in_place(std::span<double> b) const;
  std::vector<double> solve(std::span<const double> b) const;

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

enum class SolveMethod {
  /// dense LU up to dense_threshold unknowns; GMRES (CG with symmetric_hint) beyond,
  /// falling back to sparse LU on failure
  automatic,
  /// dense LU up to dense_threshold, sparse LU beyond
  direct,
  gmres,
  cg,
  dense_lu,
  sparse_lu
};

std::string to_string(SolveMethod m);
/// Throws ConfigError on unknown names.
SolveMethod parse_solve_method(const std::string& name);

struct SolveOptions {
  SolveMethod method = SolveMethod::automatic;
  double tolerance = 1e-12;
  int restart = 60;
  /// Block size of the block-Jacobi preconditioner (DG element block).
  std::size_t block_size = 1;
  std::size_t dense_threshold = 2000;
  /// 0 means 20 * n.
  std::size_t max_iterations = 0;
  bool symmetric_hint = false;
  std::vector<double> initial_guess;
};

struct SolveReport {
  std::size_t iterations = 0;
  /// ||A x - b|| / ||b||, recomputed after the solve (absolute when b = 0).
  double relative_residual = 0.0;
  std::string method;
  bool iterative = false;
};

struct SolveResult {
  std::vector<double> x;
  SolveReport report;
};

double relative_residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> b);

/// Solver bound to one matrix; factorizations and preconditioners are built once
/// and reused across right-hand sides.
class LinearSolver {
 public:
  LinearSolver(SparseMatrix a, SolveOptions options = {});
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  const SparseMatrix& matrix() const { return a_; }
  const SolveOptions& options() const { return options_; }

  /// Throws NonConvergence (with the best iterate) or SolverFailure.
  SolveResult solve(std::span<const double> b, std::span<const double> initial_guess = {}) const;

  /// Mixed precision: corrections from the double factorization, residuals in long double.
  /// Iterates until the long-double relative residual stops improving.
  std::vector<long double> solve_refined(const BasicSparseMatrix<long double>& a_exact,
                                         std::span<const long double> b, SolveReport& report) const;

 private:
  struct Impl;
  SparseMatrix a_;
  SolveOptions options_;
  std::unique_ptr<Impl> impl_;
};

SolveResult solve(const SparseMatrix& a, std::span<const double> b, const SolveOptions& options = {});

}  // namespace dgflow

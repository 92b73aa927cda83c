#include "dgflow/linalg.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace dgflow {

void write_coordinate(std::ostream& out, const SparseMatrix& a) {
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k) {
      out << i << ' ' << a.col_indices()[k] << ' ' << a.values()[k] << '\n';
    }
  }
  out.precision(old);
}

DenseLU::DenseLU(DenseMatrix a) : lu_(std::move(a)) {
  if (lu_.rows != lu_.cols) throw InvalidArgument("dense LU needs a square matrix");
  const std::size_t n = lu_.rows;
  perm_.resize(n);
  std::iota(perm_.begin(), perm_.end(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        p = i;
      }
    }
    if (best == 0.0 || !std::isfinite(best)) {
      throw SolverFailure("dense LU: matrix is singular (zero pivot in column " + std::to_string(k) + ")");
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
      std::swap(perm_[k], perm_[p]);
    }
    const double inv = 1.0 / lu_(k, k);
    double* rowk = &lu_.data[k * n];
    for (std::size_t i = k + 1; i < n; ++i) {
      double* rowi = &lu_.data[i * n];
      const double l = rowi[k] * inv;
      rowi[k] = l;
      if (l == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) rowi[j] -= l * rowk[j];
    }
  }
}

void DenseLU::solve_in_place(std::span<double> b) const {
  const std::size_t n = lu_.rows;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &lu_.data[i * n];
    double s = y[i];
    for (std::size_t j = 0; j < i; ++j) s -= row[j] * y[j];
    y[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    const double* row = &lu_.data[i * n];
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= row[j] * y[j];
    y[i] = s / row[i];
  }
  std::copy(y.begin(), y.end(), b.begin());
}

std::vector<double> DenseLU::solve(std::span<const double> b) const {
  std::vector<double> x(b.begin(), b.end());
  solve_in_place(x);
  return x;
}

std::string to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::automatic: return "automatic";
    case SolveMethod::direct: return "direct";
    case SolveMethod::gmres: return "gmres";
    case SolveMethod::cg: return "cg";
    case SolveMethod::dense_lu: return "dense_lu";
    case SolveMethod::sparse_lu: return "sparse_lu";
  }
  return "automatic";
}

SolveMethod parse_solve_method(const std::string& name) {
  for (auto m : {SolveMethod::automatic, SolveMethod::direct, SolveMethod::gmres, SolveMethod::cg,
                 SolveMethod::dense_lu, SolveMethod::sparse_lu}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown solver method '" + name + "'");
}

namespace {

double norm2(std::span<const double> v) {
  long double s = 0;
  for (double x : v) s += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(s));
}

double dot(std::span<const double> a, std::span<const double> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

std::vector<double> residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> b) {
  std::vector<double> r(a.rows());
  a.multiply<double>(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return r;
}

enum class Kernel { dense_lu, sparse_lu, gmres, cg };

}  // namespace

double relative_residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> b) {
  const double rn = norm2(residual(a, x, b));
  const double bn = norm2(b);
  return bn > 0.0 ? rn / bn : rn;
}

struct LinearSolver::Impl {
  using EigenMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  const SparseMatrix* a = nullptr;
  SolveOptions options;
  std::size_t n = 0;

  std::unique_ptr<DenseLU> dense;
  std::unique_ptr<Eigen::SparseLU<EigenMatrix, Eigen::COLAMDOrdering<int>>> sparse;
  std::vector<DenseLU> blocks;
  bool blocks_built = false;
  // set once an iterative attempt failed; later solves go straight to sparse LU
  mutable bool fallen_back = false;

  Kernel primary() const {
    switch (options.method) {
      case SolveMethod::dense_lu: return Kernel::dense_lu;
      case SolveMethod::sparse_lu: return Kernel::sparse_lu;
      case SolveMethod::gmres: return Kernel::gmres;
      case SolveMethod::cg: return Kernel::cg;
      case SolveMethod::direct: return n <= options.dense_threshold ? Kernel::dense_lu : Kernel::sparse_lu;
      case SolveMethod::automatic:
        if (n <= options.dense_threshold) return Kernel::dense_lu;
        return options.symmetric_hint ? Kernel::cg : Kernel::gmres;
    }
    return Kernel::dense_lu;
  }

  void build_dense() {
    if (dense) return;
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = a->row_offsets()[i]; k < a->row_offsets()[i + 1]; ++k)
        m(i, a->col_indices()[k]) = a->values()[k];
    dense = std::make_unique<DenseLU>(std::move(m));
  }

  void build_sparse() {
    if (sparse) return;
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(a->nnz());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = a->row_offsets()[i]; k < a->row_offsets()[i + 1]; ++k)
        t.emplace_back(static_cast<int>(i), static_cast<int>(a->col_indices()[k]), a->values()[k]);
    EigenMatrix m(static_cast<int>(n), static_cast<int>(n));
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    sparse = std::make_unique<Eigen::SparseLU<EigenMatrix, Eigen::COLAMDOrdering<int>>>();
    sparse->compute(m);
    if (sparse->info() != Eigen::Success) {
      const std::string msg = "sparse LU factorization failed: " + sparse->lastErrorMessage();
      sparse.reset();
      throw SolverFailure(msg);
    }
  }

  void build_blocks() {
    if (blocks_built) return;
    const std::size_t bs = std::max<std::size_t>(1, options.block_size);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      DenseMatrix blk(m, m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t row = start + i;
        for (std::size_t k = a->row_offsets()[row]; k < a->row_offsets()[row + 1]; ++k) {
          const std::size_t c = a->col_indices()[k];
          if (c >= start && c < start + m) blk(i, c - start) = a->values()[k];
        }
      }
      try {
        blocks.emplace_back(blk);
      } catch (const SolverFailure&) {
        // singular block: identity keeps the preconditioner well defined
        DenseMatrix id(m, m);
        for (std::size_t i = 0; i < m; ++i) id(i, i) = 1.0;
        blocks.emplace_back(std::move(id));
      }
    }
    blocks_built = true;
  }

  void precondition(std::span<const double> r, std::span<double> z) const {
    const std::size_t bs = std::max<std::size_t>(1, options.block_size);
    std::copy(r.begin(), r.end(), z.begin());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::size_t start = b * bs;
      blocks[b].solve_in_place(z.subspan(start, blocks[b].size()));
    }
  }

  std::vector<double> direct_raw(Kernel k, std::span<const double> b) const {
    if (k == Kernel::dense_lu) return dense->solve(b);
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = sparse->solve(bv);
    if (sparse->info() != Eigen::Success) throw SolverFailure("sparse LU solve failed");
    return {x.data(), x.data() + x.size()};
  }

  SolveResult direct(Kernel k, std::span<const double> b) {
    if (k == Kernel::dense_lu) build_dense();
    else build_sparse();
    SolveResult res;
    res.x = direct_raw(k, b);
    res.report.method = k == Kernel::dense_lu ? "dense_lu" : "sparse_lu";
    double rel = relative_residual(*a, res.x, b);
    // a few refinement sweeps recover digits lost to pivot growth
    for (int sweep = 0; sweep < 3 && rel > options.tolerance; ++sweep) {
      const auto r = residual(*a, res.x, b);
      const auto d = direct_raw(k, r);
      std::vector<double> trial = res.x;
      for (std::size_t i = 0; i < n; ++i) trial[i] += d[i];
      const double trial_rel = relative_residual(*a, trial, b);
      if (!(trial_rel < rel)) break;
      res.x = std::move(trial);
      rel = trial_rel;
    }
    res.report.relative_residual = rel;
    res.report.iterations = 1;
    if (!(rel <= options.tolerance)) {
      throw NonConvergence(res.report.method + ": residual " + std::to_string(rel) + " above tolerance",
                           res.x, rel);
    }
    return res;
  }

  std::size_t cap() const {
    return options.max_iterations ? options.max_iterations : std::max<std::size_t>(20 * n, 1);
  }

  SolveResult gmres(std::span<const double> b, std::span<const double> guess) {
    build_blocks();
    const std::size_t m = static_cast<std::size_t>(std::max(1, options.restart));
    const double bnorm = norm2(b);
    const double target = options.tolerance * (bnorm > 0.0 ? bnorm : 1.0);
    std::vector<double> x = guess.empty() ? std::vector<double>(n, 0.0) : std::vector<double>(guess.begin(), guess.end());
    std::vector<double> r = residual(*a, x, b);
    double beta = norm2(r);
    std::vector<double> best = x;
    double best_res = beta;
    std::size_t it = 0;
    std::vector<std::vector<double>> v(m + 1, std::vector<double>(n)), z(m, std::vector<double>(n));
    std::vector<double> h((m + 1) * m), cs(m), sn(m), g(m + 1), w(n);
    auto H = [&](std::size_t i, std::size_t j) -> double& { return h[i * m + j]; };

    while (beta > target && it < cap()) {
      for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
      std::fill(g.begin(), g.end(), 0.0);
      g[0] = beta;
      std::size_t j = 0;
      for (; j < m && it < cap(); ++j) {
        ++it;
        precondition(v[j], z[j]);
        a->multiply<double>(z[j], w);
        for (std::size_t i = 0; i <= j; ++i) {
          H(i, j) = dot(w, v[i]);
          for (std::size_t q = 0; q < n; ++q) w[q] -= H(i, j) * v[i][q];
        }
        H(j + 1, j) = norm2(w);
        for (std::size_t i = 0; i < j; ++i) {
          const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
          H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
          H(i, j) = t;
        }
        const double denom = std::hypot(H(j, j), H(j + 1, j));
        if (denom == 0.0) break;
        cs[j] = H(j, j) / denom;
        sn[j] = H(j + 1, j) / denom;
        const double hj1 = H(j + 1, j);
        H(j, j) = denom;
        H(j + 1, j) = 0.0;
        g[j + 1] = -sn[j] * g[j];
        g[j] = cs[j] * g[j];
        if (std::abs(g[j + 1]) <= target || hj1 == 0.0) {
          ++j;
          break;
        }
        for (std::size_t q = 0; q < n; ++q) v[j + 1][q] = w[q] / hj1;
      }
      if (j == 0) break;
      std::vector<double> y(j);
      for (std::size_t i = j; i-- > 0;) {
        double s = g[i];
        for (std::size_t q = i + 1; q < j; ++q) s -= H(i, q) * y[q];
        if (H(i, i) == 0.0) throw SolverFailure("GMRES breakdown (singular Hessenberg)");
        y[i] = s / H(i, i);
      }
      for (std::size_t i = 0; i < j; ++i)
        for (std::size_t q = 0; q < n; ++q) x[q] += y[i] * z[i][q];
      r = residual(*a, x, b);
      const double new_beta = norm2(r);
      if (!std::isfinite(new_beta)) throw SolverFailure("GMRES produced a non-finite iterate");
      if (new_beta < best_res) {
        best_res = new_beta;
        best = x;
      }
      // stagnation: a full cycle without progress
      if (new_beta >= beta * (1.0 - 1e-14)) {
        beta = new_beta;
        break;
      }
      beta = new_beta;
    }
    SolveResult res{best, {it, 0.0, "gmres", true}};
    res.report.relative_residual = relative_residual(*a, res.x, b);
    if (!(res.report.relative_residual <= options.tolerance)) {
      throw NonConvergence("GMRES did not reach tolerance after " + std::to_string(it) + " iterations",
                           res.x, res.report.relative_residual);
    }
    return res;
  }

  SolveResult cg(std::span<const double> b, std::span<const double> guess) {
    build_blocks();
    const double bnorm = norm2(b);
    const double target = options.tolerance * (bnorm > 0.0 ? bnorm : 1.0);
    std::vector<double> x = guess.empty() ? std::vector<double>(n, 0.0) : std::vector<double>(guess.begin(), guess.end());
    std::vector<double> r = residual(*a, x, b), zv(n), p(n), q(n);
    precondition(r, zv);
    p = zv;
    double rz = dot(r, zv);
    std::size_t it = 0;
    std::vector<double> best = x;
    double best_res = norm2(r);
    while (norm2(r) > target && it < cap()) {
      ++it;
      a->multiply<double>(p, q);
      const double pq = dot(p, q);
      if (pq == 0.0 || !std::isfinite(pq)) throw SolverFailure("CG breakdown (p^T A p = 0)");
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      const double rn = norm2(r);
      if (rn < best_res) {
        best_res = rn;
        best = x;
      }
      precondition(r, zv);
      const double rz_new = dot(r, zv);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = zv[i] + beta * p[i];
      // the recursive residual drifts; resynchronize now and then
      if (it % 50 == 0) r = residual(*a, x, b);
    }
    SolveResult res{best, {it, 0.0, "cg", true}};
    res.report.relative_residual = relative_residual(*a, res.x, b);
    if (!(res.report.relative_residual <= options.tolerance)) {
      throw NonConvergence("CG did not reach tolerance after " + std::to_string(it) + " iterations", res.x,
                           res.report.relative_residual);
    }
    return res;
  }
};

LinearSolver::LinearSolver(SparseMatrix a, SolveOptions options)
    : a_(std::move(a)), options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  if (a_.rows() != a_.cols()) throw InvalidArgument("linear solve needs a square matrix");
  impl_->a = &a_;
  impl_->options = options_;
  impl_->n = a_.rows();
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&& o) noexcept
    : a_(std::move(o.a_)), options_(std::move(o.options_)), impl_(std::move(o.impl_)) {
  if (impl_) impl_->a = &a_;
}
LinearSolver& LinearSolver::operator=(LinearSolver&& o) noexcept {
  a_ = std::move(o.a_);
  options_ = std::move(o.options_);
  impl_ = std::move(o.impl_);
  if (impl_) impl_->a = &a_;
  return *this;
}

SolveResult LinearSolver::solve(std::span<const double> b, std::span<const double> initial_guess) const {
  if (b.size() != a_.rows()) throw InvalidArgument("right-hand side size mismatch");
  const std::size_t n = a_.rows();
  if (n == 0) return {};
  if (norm2(b) == 0.0) {
    return {std::vector<double>(n, 0.0), {0, 0.0, to_string(options_.method), false}};
  }
  if (initial_guess.empty()) initial_guess = options_.initial_guess;
  Impl& impl = *impl_;
  const Kernel k = impl.fallen_back ? Kernel::sparse_lu : impl.primary();
  if (k == Kernel::dense_lu || k == Kernel::sparse_lu) return impl.direct(k, b);
  try {
    return k == Kernel::gmres ? impl.gmres(b, initial_guess) : impl.cg(b, initial_guess);
  } catch (const SolverFailure&) {
    if (options_.method != SolveMethod::automatic) throw;
    impl.fallen_back = true;
    auto res = impl.direct(Kernel::sparse_lu, b);
    res.report.method = "sparse_lu (fallback)";
    return res;
  }
}

std::vector<long double> LinearSolver::solve_refined(const BasicSparseMatrix<long double>& a_exact,
                                                     std::span<const long double> b, SolveReport& report) const {
  const std::size_t n = a_.rows();
  if (a_exact.rows() != n || b.size() != n) throw InvalidArgument("refined solve: size mismatch");
  Impl& impl = *impl_;
  Kernel k = impl.primary();
  if (k != Kernel::dense_lu) k = Kernel::sparse_lu;
  if (k == Kernel::dense_lu) impl.build_dense();
  else impl.build_sparse();

  long double bn = 0;
  for (auto v : b) bn += v * v;
  bn = std::sqrt(bn);
  std::vector<long double> x(n, 0.0L), best = x, r(n), ax(n);
  std::vector<double> rd(n);
  long double best_res = std::numeric_limits<long double>::infinity();
  std::size_t it = 0;
  int stalls = 0;
  for (; it < 40; ++it) {
    a_exact.multiply<long double>(x, ax);
    long double rn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = b[i] - ax[i];
      rn += r[i] * r[i];
    }
    rn = std::sqrt(rn);
    const long double rel = bn > 0 ? rn / bn : rn;
    if (rel < best_res) {
      stalls = rel > 0.5L * best_res ? stalls + 1 : 0;
      best_res = rel;
      best = x;
    } else {
      ++stalls;
    }
    if (rel == 0 || stalls >= 2) break;
    for (std::size_t i = 0; i < n; ++i) rd[i] = static_cast<double>(r[i]);
    const auto d = impl.direct_raw(k, rd);
    for (std::size_t i = 0; i < n; ++i) x[i] += d[i];
  }
  report.iterations = it;
  report.relative_residual = static_cast<double>(best_res);
  report.method = std::string(k == Kernel::dense_lu ? "dense_lu" : "sparse_lu") + " + long-double refinement";
  report.iterative = false;
  if (!(report.relative_residual <= options_.tolerance)) {
    std::vector<double> bd(best.begin(), best.end());
    throw NonConvergence("refined solve did not reach tolerance", bd, report.relative_residual);
  }
  return best;
}

SolveResult solve(const SparseMatrix& a, std::span<const double> b, const SolveOptions& options) {
  LinearSolver s(a, options);
  return s.solve(b);
}

}  // namespace dgflow

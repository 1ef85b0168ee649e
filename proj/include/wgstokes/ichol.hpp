#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "errors.hpp"

namespace wgstokes {

struct IncompleteCholeskyOptions {
  double drop_tol = 1e-3;
  double initial_shift = 1e-3; // relative to diag(A), used after a breakdown
  int max_shifts = 8;
};

/// Threshold incomplete Cholesky A ~ L L^T.
///
/// Left-looking column factorization. Off-diagonal entries with
/// |L(i,j)| < drop_tol * ||A(j:n, j)||_1 are discarded. A nonpositive pivot
/// restarts the factorization of A + s diag(A) with s = initial_shift,
/// doubling s up to max_shifts times.
class IncompleteCholesky {
public:
  using LowerFactor = Eigen::SparseMatrix<double, Eigen::ColMajor>;

  IncompleteCholesky() = default;

  template <typename SparseSym>
  explicit IncompleteCholesky(const SparseSym& a, IncompleteCholeskyOptions opts = {}) {
    compute(a, opts);
  }

  template <typename SparseSym>
  void compute(const SparseSym& a, IncompleteCholeskyOptions opts = {}) {
    if (a.rows() != a.cols()) {
      throw std::invalid_argument("incomplete_cholesky: matrix is not square");
    }
    if (opts.drop_tol < 0.0) {
      throw std::invalid_argument("incomplete_cholesky: negative drop tolerance");
    }
    // Lower triangle by columns; for symmetric A this is the upper triangle by rows.
    const LowerFactor lower = LowerFactor(a).template triangularView<Eigen::Lower>();
    double shift = 0.0;
    for (int attempt = 0; attempt <= opts.max_shifts; ++attempt) {
      if (factor(lower, opts.drop_tol, shift)) {
        shift_ = shift;
        return;
      }
      shift = attempt == 0 ? opts.initial_shift : 2.0 * shift;
    }
    throw factorization_failure("incomplete_cholesky: breakdown persists after " +
                                std::to_string(opts.max_shifts) + " diagonal shifts");
  }

  /// z = (L L^T)^{-1} r.
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
    z = l_.triangularView<Eigen::Lower>().solve(r);
    l_.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
  }

  const LowerFactor& factor_matrix() const noexcept { return l_; }
  double shift() const noexcept { return shift_; }
  long dropped() const noexcept { return dropped_; }

private:
  bool factor(const LowerFactor& a, double drop_tol, double shift) {
    const int n = static_cast<int>(a.rows());
    std::vector<int> col_ptr{0};
    std::vector<int> rows;
    std::vector<double> vals;
    rows.reserve(static_cast<std::size_t>(a.nonZeros()) * 2);
    vals.reserve(static_cast<std::size_t>(a.nonZeros()) * 2);

    std::vector<double> work(n, 0.0);
    std::vector<char> marked(n, 0);
    std::vector<int> pattern;
    // Columns k < j whose next unprocessed entry lies in row j form a linked
    // list headed at head[j]; pos[k] is that entry's position.
    std::vector<int> head(n, -1), next(n, -1), pos(n, 0);
    long dropped = 0;

    auto push_list = [&](int k) {
      if (pos[k] < col_ptr[k + 1]) {
        const int row = rows[pos[k]];
        next[k] = head[row];
        head[row] = k;
      }
    };

    for (int j = 0; j < n; ++j) {
      pattern.clear();
      double colnorm = 0.0;
      bool has_diag = false;
      for (LowerFactor::InnerIterator it(a, j); it; ++it) {
        const int i = static_cast<int>(it.row());
        double v = it.value();
        if (i == j) {
          v *= 1.0 + shift;
          has_diag = true;
        }
        colnorm += std::abs(v);
        work[i] = v;
        marked[i] = 1;
        pattern.push_back(i);
      }
      if (!has_diag) {
        work[j] = 0.0;
        marked[j] = 1;
        pattern.push_back(j);
      }

      int k = head[j];
      while (k >= 0) {
        const int knext = next[k];
        const int p0 = pos[k];
        const double ljk = vals[p0];
        for (int p = p0; p < col_ptr[k + 1]; ++p) {
          const int i = rows[p];
          if (!marked[i]) {
            marked[i] = 1;
            work[i] = 0.0;
            pattern.push_back(i);
          }
          work[i] -= vals[p] * ljk;
        }
        ++pos[k];
        push_list(k);
        k = knext;
      }

      const double diag = work[j];
      if (!(diag > 0.0) || !std::isfinite(diag)) {
        for (int i : pattern) {
          marked[i] = 0;
        }
        return false;
      }
      const double ljj = std::sqrt(diag);
      std::sort(pattern.begin(), pattern.end());
      rows.push_back(j);
      vals.push_back(ljj);
      const double threshold = drop_tol * colnorm;
      for (int i : pattern) {
        marked[i] = 0;
        if (i == j) {
          continue;
        }
        const double lij = work[i] / ljj;
        if (std::abs(lij) < threshold) {
          if (lij != 0.0) {
            ++dropped;
          }
          continue;
        }
        rows.push_back(i);
        vals.push_back(lij);
      }
      col_ptr.push_back(static_cast<int>(rows.size()));
      pos[j] = col_ptr[j] + 1; // skip the diagonal
      push_list(j);
    }

    l_ = Eigen::Map<const LowerFactor>(n, n, static_cast<Eigen::Index>(rows.size()),
                                       col_ptr.data(), rows.data(), vals.data());
    l_.makeCompressed();
    dropped_ = dropped;
    return true;
  }

  LowerFactor l_;
  double shift_ = 0.0;
  long dropped_ = 0;
};

template <typename SparseSym>
IncompleteCholesky incomplete_cholesky(const SparseSym& a, double drop_tol) {
  IncompleteCholeskyOptions opts;
  opts.drop_tol = drop_tol;
  return IncompleteCholesky(a, opts);
}

} // namespace wgstokes

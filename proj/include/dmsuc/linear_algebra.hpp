#pragma once

#include <cmath>
#include <vector>

#include "dmsuc/common.hpp"

namespace dmsuc {

/// Dense LU factorization with partial pivoting, row-major storage.
/// Used for simplex basis factorizations and PTDF computation.
class DenseLU {
public:
  /// Factors the n-by-n matrix `a` (row-major).  Returns false when a pivot
  /// falls below `pivot_tol` (numerically singular); the object is then not
  /// usable for solves.
  bool factor(std::vector<double> a, int n, double pivot_tol = 1e-11) {
    require(static_cast<std::size_t>(n) * static_cast<std::size_t>(n) == a.size(),
            "DenseLU: matrix size mismatch");
    lu_ = std::move(a);
    n_ = n;
    perm_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm_[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < n; ++k) {
      int pivot_row = k;
      double best = std::fabs(at(k, k));
      for (int i = k + 1; i < n; ++i) {
        double v = std::fabs(at(i, k));
        if (v > best) {
          best = v;
          pivot_row = i;
        }
      }
      if (best < pivot_tol) return false;
      if (pivot_row != k) {
        for (int j = 0; j < n; ++j) std::swap(at(k, j), at(pivot_row, j));
        std::swap(perm_[static_cast<std::size_t>(k)], perm_[static_cast<std::size_t>(pivot_row)]);
      }
      double inv = 1.0 / at(k, k);
      for (int i = k + 1; i < n; ++i) {
        double factor = at(i, k) * inv;
        at(i, k) = factor;
        if (factor == 0.0) continue;
        const double* row_k = &lu_[static_cast<std::size_t>(k) * static_cast<std::size_t>(n_)];
        double* row_i = &lu_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_)];
        for (int j = k + 1; j < n; ++j) row_i[j] -= factor * row_k[j];
      }
    }
    return true;
  }

  int size() const { return n_; }

  /// Solves A x = b in place.
  void solve(double* b) const {
    // permute
    scratch_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) scratch_[static_cast<std::size_t>(i)] = b[perm_[static_cast<std::size_t>(i)]];
    // L y = Pb (unit diagonal)
    for (int i = 1; i < n_; ++i) {
      const double* row = &lu_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_)];
      double sum = scratch_[static_cast<std::size_t>(i)];
      for (int j = 0; j < i; ++j) sum -= row[j] * scratch_[static_cast<std::size_t>(j)];
      scratch_[static_cast<std::size_t>(i)] = sum;
    }
    // U x = y
    for (int i = n_ - 1; i >= 0; --i) {
      const double* row = &lu_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_)];
      double sum = scratch_[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n_; ++j) sum -= row[j] * scratch_[static_cast<std::size_t>(j)];
      scratch_[static_cast<std::size_t>(i)] = sum / row[i];
    }
    for (int i = 0; i < n_; ++i) b[i] = scratch_[static_cast<std::size_t>(i)];
  }

  /// Solves A^T x = b in place.
  void solve_transpose(double* b) const {
    scratch_.assign(static_cast<std::size_t>(n_), 0.0);
    // U^T y = b (forward, U^T is lower triangular)
    for (int i = 0; i < n_; ++i) {
      double sum = b[i];
      for (int j = 0; j < i; ++j)
        sum -= lu_[static_cast<std::size_t>(j) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i)] *
               scratch_[static_cast<std::size_t>(j)];
      scratch_[static_cast<std::size_t>(i)] =
          sum / lu_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i)];
    }
    // L^T w = y (backward, unit diagonal)
    for (int i = n_ - 1; i >= 0; --i) {
      double sum = scratch_[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n_; ++j)
        sum -= lu_[static_cast<std::size_t>(j) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i)] *
               scratch_[static_cast<std::size_t>(j)];
      scratch_[static_cast<std::size_t>(i)] = sum;
    }
    // x = P^T w
    for (int i = 0; i < n_; ++i) b[perm_[static_cast<std::size_t>(i)]] = scratch_[static_cast<std::size_t>(i)];
  }

private:
  double& at(int i, int j) {
    return lu_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j)];
  }

  int n_ = 0;
  std::vector<double> lu_;
  std::vector<int> perm_;
  mutable std::vector<double> scratch_;
};

}  // namespace dmsuc

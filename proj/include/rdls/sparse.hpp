#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rdls/error.hpp"
#include "rdls/mesh.hpp"

namespace rdls {

/// Compressed-row sparse matrix with sorted, unique column indices per row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<Index> col;
  std::vector<double> val;

  std::size_t nnz() const noexcept { return col.size(); }

  /// Position of entry (i, j) in `val`, or -1 when outside the pattern.
  std::int64_t find(std::size_t i, Index j) const {
    const auto b = col.begin() + row_ptr[i], e = col.begin() + row_ptr[i + 1];
    const auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? (it - col.begin()) : -1;
  }

  double at(std::size_t i, Index j) const {
    const auto p = find(i, j);
    return p < 0 ? 0.0 : val[p];
  }

  double diagonal(std::size_t i) const { return at(i, static_cast<Index>(i)); }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }

  void apply(std::span<const double> x, std::span<double> y) const { multiply(x, y); }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(rows);
    multiply(x, y);
    return y;
  }

  /// Frobenius norm.
  double norm() const {
    double s = 0.0;
    for (double v : val) s += v * v;
    return std::sqrt(s);
  }

  static CsrMatrix identity(std::size_t n) {
    CsrMatrix m;
    m.rows = m.cols = n;
    m.row_ptr.resize(n + 1);
    m.col.resize(n);
    m.val.assign(n, 1.0);
    for (std::size_t i = 0; i <= n; ++i) m.row_ptr[i] = static_cast<std::int64_t>(i);
    for (std::size_t i = 0; i < n; ++i) m.col[i] = static_cast<Index>(i);
    return m;
  }

  static CsrMatrix from_dense(const std::vector<std::vector<double>>& a) {
    CsrMatrix m;
    m.rows = a.size();
    m.cols = a.empty() ? 0 : a[0].size();
    m.row_ptr.assign(1, 0);
    for (const auto& r : a) {
      for (std::size_t j = 0; j < r.size(); ++j)
        if (r[j] != 0.0) {
          m.col.push_back(static_cast<Index>(j));
          m.val.push_back(r[j]);
        }
      m.row_ptr.push_back(static_cast<std::int64_t>(m.col.size()));
    }
    return m;
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> a(rows, std::vector<double>(cols, 0.0));
    for (std::size_t i = 0; i < rows; ++i)
      for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k) a[i][col[k]] = val[k];
    return a;
  }
};

/// Node-coupling pattern of a set of tets whose corners are given in a
/// local numbering `0..n-1`. Every row gets its diagonal.
inline CsrMatrix pattern_from_elements(std::size_t n, std::span<const Tet> local_tets) {
  std::vector<std::vector<Index>> adj(n);
  for (std::size_t i = 0; i < n; ++i) adj[i].push_back(static_cast<Index>(i));
  for (const Tet& t : local_tets)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (a != b) adj[t[a]].push_back(t[b]);
  CsrMatrix m;
  m.rows = m.cols = n;
  m.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = adj[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    m.row_ptr[i + 1] = m.row_ptr[i] + static_cast<std::int64_t>(r.size());
  }
  m.col.reserve(m.row_ptr[n]);
  for (auto& r : adj) m.col.insert(m.col.end(), r.begin(), r.end());
  m.val.assign(m.col.size(), 0.0);
  return m;
}

/// Submatrix on rows/cols `0..k-1` (a leading principal block).
inline CsrMatrix leading_block(const CsrMatrix& a, std::size_t k) {
  CsrMatrix m;
  m.rows = m.cols = k;
  m.row_ptr.assign(1, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (auto p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
      if (static_cast<std::size_t>(a.col[p]) < k) {
        m.col.push_back(a.col[p]);
        m.val.push_back(a.val[p]);
      }
    m.row_ptr.push_back(static_cast<std::int64_t>(m.col.size()));
  }
  return m;
}

/// Submatrix on the given rows/cols, renumbered in the order of `index`.
inline CsrMatrix principal_submatrix(const CsrMatrix& a, std::span<const Index> index) {
  std::vector<Index> where(a.cols, -1);
  for (std::size_t l = 0; l < index.size(); ++l) where[index[l]] = static_cast<Index>(l);
  CsrMatrix m;
  m.rows = m.cols = index.size();
  m.row_ptr.assign(1, 0);
  std::vector<std::pair<Index, double>> row;
  for (Index g : index) {
    row.clear();
    for (auto p = a.row_ptr[g]; p < a.row_ptr[g + 1]; ++p)
      if (where[a.col[p]] >= 0) row.emplace_back(where[a.col[p]], a.val[p]);
    std::sort(row.begin(), row.end());
    for (const auto& [c, v] : row) {
      m.col.push_back(c);
      m.val.push_back(v);
    }
    m.row_ptr.push_back(static_cast<std::int64_t>(m.col.size()));
  }
  return m;
}

/// Matrix Market coordinate export (1-based indices).
inline void write_matrix_market(const CsrMatrix& a, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows << ' ' << a.cols << ' ' << a.nnz() << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      os << i + 1 << ' ' << a.col[k] + 1 << ' ' << a.val[k] << '\n';
}

inline void save_matrix_market(const CsrMatrix& a, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write '" + path + "'");
  write_matrix_market(a, os);
}

/// Incomplete LU with zero fill on the pattern of `a`. Unit lower factor.
class Ilu0 {
 public:
  Ilu0() = default;

  explicit Ilu0(CsrMatrix a) : lu_(std::move(a)) {
    const std::size_t n = lu_.rows;
    diag_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      diag_[i] = lu_.find(i, static_cast<Index>(i));
      if (diag_[i] < 0) throw SingularError("ILU(0): missing diagonal entry in row " + std::to_string(i));
    }
    std::vector<std::int64_t> pos(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) pos[lu_.col[k]] = k;
      for (auto k = lu_.row_ptr[i]; k < diag_[i]; ++k) {
        const auto j = static_cast<std::size_t>(lu_.col[k]);
        const double piv = lu_.val[diag_[j]];
        lu_.val[k] /= piv;
        const double lij = lu_.val[k];
        for (auto q = diag_[j] + 1; q < lu_.row_ptr[j + 1]; ++q) {
          const auto p = pos[lu_.col[q]];
          if (p >= 0) lu_.val[p] -= lij * lu_.val[q];
        }
      }
      if (!(std::abs(lu_.val[diag_[i]]) > 0.0) || !std::isfinite(lu_.val[diag_[i]]))
        throw SingularError("ILU(0): zero pivot in row " + std::to_string(i));
      for (auto k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) pos[lu_.col[k]] = -1;
    }
  }

  std::size_t size() const noexcept { return lu_.rows; }

  /// Solves (LU) z = r in place.
  void solve(std::span<double> z) const {
    const std::size_t n = lu_.rows;
    for (std::size_t i = 0; i < n; ++i) {
      double s = z[i];
      for (auto k = lu_.row_ptr[i]; k < diag_[i]; ++k) s -= lu_.val[k] * z[lu_.col[k]];
      z[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = z[i];
      for (auto k = diag_[i] + 1; k < lu_.row_ptr[i + 1]; ++k) s -= lu_.val[k] * z[lu_.col[k]];
      z[i] = s / lu_.val[diag_[i]];
    }
  }

 private:
  CsrMatrix lu_;
  std::vector<std::int64_t> diag_;
};

/// Dense LU with partial pivoting (Eigen) of a small sparse block.
class DenseLu {
 public:
  DenseLu() = default;

  explicit DenseLu(const CsrMatrix& a) {
    const auto n = static_cast<Eigen::Index>(a.rows);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) m(static_cast<Eigen::Index>(i), a.col[k]) = a.val[k];
    double scale = 0.0;
    for (double v : a.val) scale = std::max(scale, std::abs(v));
    lu_.compute(m);
    // PartialPivLU never reports failure; check the pivots ourselves.
    const auto& f = lu_.matrixLU();
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(std::abs(f(i, i)) > 1e-14 * scale) || !std::isfinite(f(i, i)))
        throw SingularError("dense LU: singular pivot at row " + std::to_string(i));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(lu_.rows()); }

  void solve(std::span<double> z) const {
    Eigen::Map<Eigen::VectorXd> v(z.data(), static_cast<Eigen::Index>(z.size()));
    v = lu_.solve(v).eval();
  }

 private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace rdls

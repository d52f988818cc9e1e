#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "specctrl/types.hpp"

namespace specctrl {

/// Eigenvector matrices with a 2-norm condition number above this are
/// treated as near-defective.
inline constexpr double kMaxEigenvectorCondition = 1e8;

struct SigmaBounds {
  double min_real;
  double max_real;
};

inline CVec eigenvalues(const CMat& m) {
  if (m.rows() != m.cols()) {
    throw ModelError("eigenvalues: matrix is not square (" +
                     detail::dims(m) + ")");
  }
  if (m.size() == 0) return CVec(0);
  Eigen::ComplexEigenSolver<CMat> solver(m, false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvalues: eigensolver did not converge");
  }
  return solver.eigenvalues();
}

/// Minimal and maximal real parts over the spectrum of a square matrix.
inline SigmaBounds sigma_bounds(const CMat& m) {
  if (m.size() == 0) {
    throw ModelError("sigma_bounds: empty matrix has no spectrum");
  }
  if (!m.allFinite()) {
    throw ModelError("sigma_bounds: matrix has non-finite entries");
  }
  const CVec ev = eigenvalues(m);
  SigmaBounds out{std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  for (const cd& s : ev) {
    out.min_real = std::min(out.min_real, s.real());
    out.max_real = std::max(out.max_real, s.real());
  }
  return out;
}

inline double spectral_abscissa(const CMat& m) { return sigma_bounds(m).max_real; }

/// Largest eigenvalue of a Hermitian matrix; zero for an empty one.
inline double hermitian_max_eig(const CMat& h) {
  if (h.size() == 0) return 0.0;
  const CMat sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

inline double hermitian_min_eig(const CMat& h) {
  if (h.size() == 0) return 0.0;
  const CMat sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// sqrt of the largest eigenvalue of M* M, i.e. the spectral norm.
inline double spectral_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

inline double condition_number(const CMat& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<CMat> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

/// Total order on modes: decreasing real part, then increasing |Im|, then
/// positive imaginary part first.
inline bool mode_before(const cd& a, const cd& b) {
  if (a.real() != b.real()) return a.real() > b.real();
  const double ia = std::abs(a.imag());
  const double ib = std::abs(b.imag());
  if (ia != ib) return ia < ib;
  return a.imag() > b.imag();
}

/// Permutation that sorts `values` by mode_before.
inline std::vector<Eigen::Index> mode_order(const CVec& values) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) {
    return mode_before(values(i), values(j));
  });
  return idx;
}

inline bool is_diagonal(const CMat& m, double tol = 0.0) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i != j && std::abs(m(i, j)) > tol) return false;
    }
  }
  return true;
}

inline bool is_real(const CMat& m, double tol = 0.0) {
  return m.size() == 0 || m.imag().cwiseAbs().maxCoeff() <= tol;
}

/// Condition number of the unit-column eigenvector matrix. Diagonal
/// matrices report 1.
inline double eigenvector_condition(const CMat& m) {
  if (m.size() == 0 || is_diagonal(m)) return 1.0;
  Eigen::ComplexEigenSolver<CMat> solver(m, true);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvector_condition: eigensolver did not converge");
  }
  CMat v = solver.eigenvectors();
  for (Eigen::Index j = 0; j < v.cols(); ++j) v.col(j).normalize();
  return condition_number(v);
}

/// Diagonal similarity scaling (powers of two) that balances row and column
/// norms of a square real matrix; the balanced matrix is D^{-1} A D.
inline RVec balancing_scale(const RMat& a) {
  const Eigen::Index n = a.rows();
  RVec d = RVec::Ones(n);
  if (n < 2) return d;
  RMat m = a;
  constexpr double radix = 2.0;
  bool converged = false;
  for (int sweep = 0; sweep < 200 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0;
      double r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(m(j, i));
        r += std::abs(m(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        d(i) *= f;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
  return d;
}

}  // namespace specctrl

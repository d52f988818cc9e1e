#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specctrl/linalg.hpp"
#include "specctrl/types.hpp"

namespace specctrl {

/// One mode of the stable remainder: dz/dt = a z + b u, contributing c z to y.
struct ModalTriple {
  cd a;
  CRow b;  // 1 x n_u
  CVec c;  // n_y x 1
};

/// Truncated decomposed plant: unstable block (A0, B0, C0), retained stable
/// block (A1, B1, C1), and a finite list of tail modes.
///
/// The optional remainder bounds cover the modes beyond the stored tail:
/// tail_b_sum_bound >= sum |b_i|^2 and tail_c_sum_bound >= sum |c_i|^2 over
/// i > tail.size().
struct SpectralModel {
  CMat A0, A1;
  CMat B0, B1;
  CMat C0, C1;
  std::vector<ModalTriple> tail;
  double delta = 0.0;
  std::optional<double> tail_b_sum_bound;
  std::optional<double> tail_c_sum_bound;

  Eigen::Index n0() const { return A0.rows(); }
  Eigen::Index n1_dim() const { return A1.rows(); }
  Eigen::Index order() const { return n0() + n1_dim(); }
  Eigen::Index n_u() const { return B0.cols() > 0 ? B0.cols() : B1.cols(); }
  Eigen::Index n_y() const { return C0.rows() > 0 ? C0.rows() : C1.rows(); }
  Eigen::Index n_tail() const { return static_cast<Eigen::Index>(tail.size()); }
};

struct ModelSplit {
  double delta;
  Eigen::Index n0;
  Eigen::Index n1_dim;
};

namespace detail {

inline bool finite(const cd& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline void check_shape(std::vector<std::string>& out, const char* name, const CMat& m,
                        Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    out.push_back(std::string("dimension: ") + name + " is " + dims(m) + ", expected " +
                  dims(rows, cols));
  }
}

inline std::string fmt_cd(const cd& z) {
  std::ostringstream os;
  os.precision(6);
  os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
  return os.str();
}

}  // namespace detail

/// Lists every violated structural invariant. Empty means the model is valid.
inline std::vector<std::string> validate(const SpectralModel& m) {
  std::vector<std::string> out;
  if (!(m.delta > 0.0) || !std::isfinite(m.delta)) {
    out.push_back("delta must be a positive finite number");
  }

  const Eigen::Index n0 = m.A0.rows();
  const Eigen::Index n1 = m.A1.rows();
  const Eigen::Index nu = m.n_u();
  const Eigen::Index ny = m.n_y();
  detail::check_shape(out, "A0", m.A0, n0, n0);
  detail::check_shape(out, "A1", m.A1, n1, n1);
  detail::check_shape(out, "B0", m.B0, n0, nu);
  detail::check_shape(out, "B1", m.B1, n1, nu);
  detail::check_shape(out, "C0", m.C0, ny, n0);
  detail::check_shape(out, "C1", m.C1, ny, n1);
  for (std::size_t i = 0; i < m.tail.size(); ++i) {
    const auto& t = m.tail[i];
    if (t.b.size() != nu || t.c.size() != ny) {
      out.push_back("dimension: tail[" + std::to_string(i) + "] has b of length " +
                    std::to_string(t.b.size()) + " and c of length " +
                    std::to_string(t.c.size()) + ", expected " + std::to_string(nu) +
                    " and " + std::to_string(ny));
    }
  }
  if (!out.empty() && out.front().rfind("dimension", 0) == 0) return out;

  auto check_finite = [&](const char* name, const CMat& x) {
    if (!x.allFinite()) out.push_back(std::string("non-finite entry in ") + name);
  };
  check_finite("A0", m.A0);
  check_finite("A1", m.A1);
  check_finite("B0", m.B0);
  check_finite("B1", m.B1);
  check_finite("C0", m.C0);
  check_finite("C1", m.C1);
  for (std::size_t i = 0; i < m.tail.size(); ++i) {
    const auto& t = m.tail[i];
    if (!detail::finite(t.a) || !t.b.allFinite() || !t.c.allFinite()) {
      out.push_back("non-finite entry in tail[" + std::to_string(i) + "]");
    }
  }
  if (!out.empty()) return out;

  // Spectra of the finite blocks; either block may be a general
  // diagonalizable matrix (e.g. a real rotation-scaling form).
  std::vector<cd> ev0;
  std::vector<cd> ev1;
  auto block_spectrum = [&](const char* name, const CMat& a, std::vector<cd>& ev) {
    if (a.size() == 0) return;
    if (is_diagonal(a)) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) ev.push_back(a(i, i));
      for (std::size_t i = 1; i < ev.size(); ++i) {
        if (mode_before(ev[i], ev[i - 1])) {
          out.push_back(std::string("ordering: ") + name + " diagonal entry " +
                        std::to_string(i) + " (" + detail::fmt_cd(ev[i]) +
                        ") precedes entry " + std::to_string(i - 1));
        }
      }
      return;
    }
    if (eigenvector_condition(a) > kMaxEigenvectorCondition) {
      out.push_back(std::string("near-defective spectrum in ") + name);
    }
    const CVec e = eigenvalues(a);
    for (const cd& s : e) ev.push_back(s);
  };
  block_spectrum("A0", m.A0, ev0);
  block_spectrum("A1", m.A1, ev1);

  const double delta = m.delta;
  for (std::size_t i = 0; i < ev0.size(); ++i) {
    if (ev0[i].real() < -delta) {
      out.push_back("sigma_min(A0) < -delta: eigenvalue " + std::to_string(i) + " (" +
                    detail::fmt_cd(ev0[i]) + ") belongs to the stable block");
    }
  }
  double a1_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ev1.size(); ++i) {
    if (ev1[i].real() >= -delta) {
      out.push_back("sigma_max(A1) >= -delta: eigenvalue " + std::to_string(i) + " (" +
                    detail::fmt_cd(ev1[i]) + ")");
    }
    a1_min = std::min(a1_min, ev1[i].real());
  }
  for (std::size_t i = 0; i < m.tail.size(); ++i) {
    const cd a = m.tail[i].a;
    if (!ev1.empty() && !(a.real() < a1_min)) {
      out.push_back("ordering: tail eigenvalue right of A1 block at tail[" +
                    std::to_string(i) + "] (" + detail::fmt_cd(a) + ")");
    }
    if (ev1.empty() && a.real() >= -delta) {
      out.push_back("sigma_max(tail) >= -delta at tail[" + std::to_string(i) + "] (" +
                    detail::fmt_cd(a) + ")");
    }
    if (i > 0 && mode_before(a, m.tail[i - 1].a)) {
      out.push_back("ordering: tail[" + std::to_string(i) + "] precedes tail[" +
                    std::to_string(i - 1) + "]");
    }
  }
  return out;
}

/// Counts the modes at or right of -delta and keeps `extra_stable` of the
/// following ones. `eigs` must already be in mode order.
inline ModelSplit split_at(const std::vector<cd>& eigs, double delta,
                           Eigen::Index extra_stable) {
  if (!(delta > 0.0)) throw ModelError("split_at: delta must be positive");
  if (extra_stable < 0) throw ModelError("split_at: extra_stable must be nonnegative");
  for (std::size_t i = 1; i < eigs.size(); ++i) {
    if (mode_before(eigs[i], eigs[i - 1])) {
      throw ModelError("split_at: eigenvalues are not in mode order at index " +
                       std::to_string(i));
    }
  }
  Eigen::Index n0 = 0;
  for (const cd& s : eigs) {
    if (s.real() >= -delta) ++n0;
  }
  const auto total = static_cast<Eigen::Index>(eigs.size());
  if (total > 0 && n0 == total) {
    throw ModelError("split_at: every mode has real part >= -delta; no stable tail");
  }
  return ModelSplit{delta, n0, std::min(extra_stable, total - n0)};
}

inline ModelSplit split_at(const std::vector<ModalTriple>& triples, double delta,
                           Eigen::Index extra_stable) {
  std::vector<cd> eigs;
  eigs.reserve(triples.size());
  for (const auto& t : triples) eigs.push_back(t.a);
  return split_at(eigs, delta, extra_stable);
}

/// Concatenated spectrum A0 -> A1 -> tail. Diagonal blocks contribute their
/// diagonal in stored order; other blocks their sorted eigenvalues.
inline std::vector<cd> model_eigenvalues(const SpectralModel& m) {
  std::vector<cd> out;
  auto add_block = [&](const CMat& a) {
    if (a.size() == 0) return;
    if (is_diagonal(a)) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) out.push_back(a(i, i));
      return;
    }
    const CVec ev = eigenvalues(a);
    for (Eigen::Index i : mode_order(ev)) out.push_back(ev(i));
  };
  add_block(m.A0);
  add_block(m.A1);
  for (const auto& t : m.tail) out.push_back(t.a);
  return out;
}

}  // namespace specctrl

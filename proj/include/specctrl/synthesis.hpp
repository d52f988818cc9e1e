#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "specctrl/linalg.hpp"
#include "specctrl/spectral_model.hpp"
#include "specctrl/types.hpp"

namespace specctrl {

struct Gains {
  CMat K0;  // n_u x n0
  CMat G0;  // n0 x n_y
  std::vector<cd> controller_poles;
  std::vector<cd> observer_poles;
};

struct LyapunovPair {
  CMat P0;
  CMat P1;
  double delta = 0.0;
};

struct Certificate {
  double delta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double eta = 0.0;
  double certified_rate = 0.0;
  double S_b = 0.0;
  double S_c = 0.0;
  bool tail_inconclusive = false;
  bool satisfied = false;
};

enum class Representation { Complex, RealifiedBlockDiagonal };

/// Dynamic output feedback x_c' = L x_c + M y + N u, u = K x_c.
struct ControllerRealization {
  CMat L, M, Nmat, K;
  Representation representation = Representation::Complex;
  // Conjugate partner of each coordinate (its own index for self-conjugate
  // coordinates); empty when unknown.
  std::vector<Eigen::Index> partner;
};

/// Model mismatch: true blocks minus the blocks the controller is built on.
struct UncertaintySpec {
  CMat dA0, dA1, dB0, dB1, dC0, dC1;

  static UncertaintySpec zero_like(const SpectralModel& m) {
    return UncertaintySpec{CMat::Zero(m.n0(), m.n0()),       CMat::Zero(m.n1_dim(), m.n1_dim()),
                           CMat::Zero(m.n0(), m.n_u()),      CMat::Zero(m.n1_dim(), m.n_u()),
                           CMat::Zero(m.n_y(), m.n0()),      CMat::Zero(m.n_y(), m.n1_dim())};
  }

  struct Norms {
    double dA0, dA1, dB0, dB1, dC0, dC1;
  };
  Norms norms() const {
    return Norms{spectral_norm(dA0), spectral_norm(dA1), spectral_norm(dB0),
                 spectral_norm(dB1), spectral_norm(dC0), spectral_norm(dC1)};
  }

  UncertaintySpec scaled(double t) const {
    return UncertaintySpec{t * dA0, t * dA1, t * dB0, t * dB1, t * dC0, t * dC1};
  }
};

/// Knowledge model plus mismatch gives the true finite blocks; the tail is shared.
inline SpectralModel apply_uncertainty(const SpectralModel& hat, const UncertaintySpec& u) {
  SpectralModel m = hat;
  m.A0 += u.dA0;
  m.A1 += u.dA1;
  m.B0 += u.dB0;
  m.B1 += u.dB1;
  m.C0 += u.dC0;
  m.C1 += u.dC1;
  return m;
}

inline void check_uncertainty(const SpectralModel& hat, const UncertaintySpec& u) {
  auto same = [](const CMat& a, const CMat& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(u.dA0, hat.A0) || !same(u.dA1, hat.A1) || !same(u.dB0, hat.B0) ||
      !same(u.dB1, hat.B1) || !same(u.dC0, hat.C0) || !same(u.dC1, hat.C1)) {
    throw ModelError("uncertainty: perturbation dimensions do not match the model blocks");
  }
}

// ---------------------------------------------------------------------------
// Controllability and pole placement

/// Smallest rank of [sI - A, B] over the eigenvalues s of A.
inline Eigen::Index hautus_rank(const CMat& a, const CMat& b) {
  const Eigen::Index n = a.rows();
  if (n == 0) return 0;
  const CVec ev = eigenvalues(a);
  const double scale = std::max({1.0, spectral_norm(a), spectral_norm(b)});
  Eigen::Index worst = n;
  CMat h(n, n + b.cols());
  for (const cd& s : ev) {
    h.leftCols(n) = s * CMat::Identity(n, n) - a;
    h.rightCols(b.cols()) = b;
    Eigen::JacobiSVD<CMat> svd(h);
    const auto& sv = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > 1e-10 * scale) ++r;
    }
    worst = std::min(worst, r);
  }
  return worst;
}

inline bool is_controllable(const CMat& a, const CMat& b) { return hautus_rank(a, b) == a.rows(); }

inline bool is_observable(const CMat& a, const CMat& c) {
  return hautus_rank(a.adjoint(), c.adjoint()) == a.rows();
}

inline constexpr double kControllabilityWarnCondition = 1e10;

/// Ackermann placement for a single input: returns K with sigma(A + B K) = poles.
/// When `warnings` is given, an ill-conditioned controllability matrix is
/// reported there.
inline CMat place_poles(const CMat& a, const CMat& b, const std::vector<cd>& poles,
                        std::vector<std::string>* warnings = nullptr) {
  const Eigen::Index m = a.rows();
  if (a.cols() != m) throw ModelError("place_poles: A is not square");
  if (b.rows() != m || b.cols() != 1) {
    throw ModelError("place_poles: B must be " + detail::dims(m, 1) + ", got " + detail::dims(b));
  }
  if (static_cast<Eigen::Index>(poles.size()) != m) {
    throw ModelError("place_poles: expected " + std::to_string(m) + " poles, got " +
                     std::to_string(poles.size()));
  }
  if (m == 0) return CMat::Zero(1, 0);
  const Eigen::Index rank = hautus_rank(a, b);
  if (rank < m) {
    throw ModelError("place_poles: pair (A, B) is not controllable (Hautus rank " +
                     std::to_string(rank) + " < " + std::to_string(m) + ")");
  }
  CMat ctrb(m, m);
  ctrb.col(0) = b.col(0);
  for (Eigen::Index k = 1; k < m; ++k) ctrb.col(k) = a * ctrb.col(k - 1);
  const double cond = condition_number(ctrb);
  if (warnings != nullptr && cond > kControllabilityWarnCondition) {
    warnings->push_back("place_poles: controllability matrix condition number " +
                        std::to_string(cond));
  }
  CMat phi = CMat::Identity(m, m);
  for (const cd& p : poles) phi = phi * (a - p * CMat::Identity(m, m));
  // K = -e_m^T ctrb^{-1} phi(A)
  const CMat sol = ctrb.partialPivLu().solve(phi);
  return -sol.row(m - 1);
}

/// Observer placement by duality: returns G with sigma(A + G C) = poles.
inline CMat place_observer(const CMat& a, const CMat& c, const std::vector<cd>& poles,
                           std::vector<std::string>* warnings = nullptr) {
  if (c.rows() != 1) throw ModelError("place_observer: C must have a single output row");
  std::vector<cd> conj_poles;
  conj_poles.reserve(poles.size());
  for (const cd& p : poles) conj_poles.push_back(std::conj(p));
  try {
    return place_poles(a.adjoint(), c.adjoint(), conj_poles, warnings).adjoint();
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    if (msg.find("not controllable") != std::string::npos) {
      throw ModelError("place_observer: pair (C, A) is not observable" +
                       msg.substr(msg.find(" (")));
    }
    throw;
  }
}

/// Places controller and observer poles on the unstable block and checks
/// both closed spectra lie strictly left of -delta.
inline Gains synthesize_gains(const SpectralModel& m, const std::vector<cd>& controller_poles,
                              const std::vector<cd>& observer_poles,
                              std::vector<std::string>* warnings = nullptr) {
  Gains g;
  g.controller_poles = controller_poles;
  g.observer_poles = observer_poles;
  g.K0 = place_poles(m.A0, m.B0, controller_poles, warnings);
  g.G0 = place_observer(m.A0, m.C0, observer_poles, warnings);
  if (m.n0() > 0) {
    const double sc = spectral_abscissa(m.A0 + m.B0 * g.K0);
    const double so = spectral_abscissa(m.A0 + g.G0 * m.C0);
    if (!(sc < -m.delta) || !(so < -m.delta)) {
      throw ModelError("synthesize_gains: placed poles are not strictly left of -delta");
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Lyapunov

/// Solves P (F + delta I) + (F + delta I)^* P = -I by the complex Schur method.
inline CMat solve_shifted_lyapunov(const CMat& f, double delta) {
  const Eigen::Index n = f.rows();
  if (f.cols() != n) throw ModelError("solve_shifted_lyapunov: F is not square");
  if (n == 0) return CMat(0, 0);
  if (!f.allFinite()) throw ModelError("solve_shifted_lyapunov: F has non-finite entries");
  const CMat fs = f + delta * CMat::Identity(n, n);
  Eigen::ComplexSchur<CMat> schur(fs);
  if (schur.info() != Eigen::Success) {
    throw NumericalError("solve_shifted_lyapunov: Schur decomposition did not converge");
  }
  const CMat& t = schur.matrixT();
  const CMat& u = schur.matrixU();
  double abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) abscissa = std::max(abscissa, t(k, k).real());
  if (!(abscissa < 0.0)) {
    throw NumericalError("shifted matrix not Hurwitz: sigma_max(F) + delta = " +
                         std::to_string(abscissa));
  }
  // X T + T^* X = -I with X = U^* P U, solved column by column.
  const CMat tstar = t.adjoint();
  CMat x = CMat::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    CVec rhs = -CVec::Unit(n, k);
    for (Eigen::Index j = 0; j < k; ++j) rhs -= x.col(j) * t(j, k);
    CMat lhs = tstar;
    lhs.diagonal().array() += t(k, k);
    x.col(k) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  CMat p = u * x * u.adjoint();
  p = 0.5 * (p + p.adjoint()).eval();
  const double pmin = hermitian_min_eig(p);
  if (!(pmin > 0.0)) {
    throw NumericalError("solve_shifted_lyapunov: solution is not positive definite");
  }
  return p;
}

inline double lyapunov_residual(const CMat& p, const CMat& f, double delta) {
  const Eigen::Index n = f.rows();
  const CMat fs = f + delta * CMat::Identity(n, n);
  return spectral_norm(p * fs + fs.adjoint() * p + CMat::Identity(n, n));
}

/// F0 = [A0 + B0 K0, -G0 C0; 0, A0 + G0 C0].
inline CMat assemble_F0(const SpectralModel& m, const Gains& g) {
  const Eigen::Index n0 = m.n0();
  CMat f = CMat::Zero(2 * n0, 2 * n0);
  f.topLeftCorner(n0, n0) = m.A0 + m.B0 * g.K0;
  f.topRightCorner(n0, n0) = -g.G0 * m.C0;
  f.bottomRightCorner(n0, n0) = m.A0 + g.G0 * m.C0;
  return f;
}

inline LyapunovPair solve_lyapunov_pair(const SpectralModel& m, const Gains& g) {
  return LyapunovPair{solve_shifted_lyapunov(assemble_F0(m, g), m.delta),
                      solve_shifted_lyapunov(m.A1, m.delta), m.delta};
}

// ---------------------------------------------------------------------------
// Certificates

struct Weights {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct TailSums {
  double S_b = 0.0;
  double S_c = 0.0;
  bool inconclusive = false;
};

namespace detail {

/// [-G0; G0]
inline CMat output_injection(const Gains& g) {
  CMat out(2 * g.G0.rows(), g.G0.cols());
  out << -g.G0, g.G0;
  return out;
}

inline constexpr double kTailConvergence = 1e-12;
inline constexpr double kDegenerateFloor = 1e-12;

/// sigma_min(A1) with the tail standing in for an empty A1 block.
inline std::optional<double> stable_floor(const SpectralModel& m) {
  if (m.n1_dim() > 0) return sigma_bounds(m.A1).min_real;
  if (m.tail.empty()) return std::nullopt;
  double r = -std::numeric_limits<double>::infinity();
  for (const auto& t : m.tail) r = std::max(r, t.a.real());
  return r;
}

}  // namespace detail

inline TailSums tail_sums(const SpectralModel& m, const Gains& g, const CMat& P0) {
  const CMat gg = detail::output_injection(g);
  const CMat kernel = gg.adjoint() * P0 * gg;
  TailSums s;
  double last_b = 0.0;
  double last_c = 0.0;
  for (const auto& t : m.tail) {
    last_b = (t.b * g.K0).squaredNorm();
    last_c = std::max(0.0, (t.c.adjoint() * kernel * t.c)(0).real());
    s.S_b += last_b;
    s.S_c += last_c;
  }
  if (!m.tail.empty()) {
    if (!m.tail_b_sum_bound && last_b > detail::kTailConvergence * s.S_b) s.inconclusive = true;
    if (!m.tail_c_sum_bound && last_c > detail::kTailConvergence * s.S_c) s.inconclusive = true;
  }
  if (m.tail_b_sum_bound) s.S_b += std::pow(spectral_norm(g.K0), 2) * *m.tail_b_sum_bound;
  if (m.tail_c_sum_bound) s.S_c += hermitian_max_eig(kernel) * *m.tail_c_sum_bound;
  return s;
}

/// Weights of the Lyapunov functional. `b1` is the input block entering the
/// beta denominator (B1, or its knowledge counterpart in the uncertain case).
inline Weights weights(const SpectralModel& m, const Gains& g, const CMat& P0, const CMat& P1,
                       const TailSums& sums, const CMat& b1) {
  const double delta = m.delta;
  const auto floor = detail::stable_floor(m);
  Weights w;
  if (m.n0() == 0) {
    // No unstable block: the controller is zero and no cross terms remain.
    if (m.n1_dim() > 0) w.beta = w.gamma = 1.0;
    return w;
  }
  const double sb = std::max(sums.S_b, detail::kDegenerateFloor);
  const double p0min = hermitian_min_eig(P0);
  if (!(p0min > 0.0)) throw NumericalError("weights: P0 is not positive definite");
  if (!floor) {
    w.alpha = (4.0 / delta) * sb / p0min;
    return w;
  }
  const double gap = std::abs(*floor) - delta;
  if (!(gap > 0.0)) {
    throw ModelError("tail too slow: |sigma_min(A1)| = " + std::to_string(std::abs(*floor)) +
                     " <= delta = " + std::to_string(delta));
  }
  w.alpha = (4.0 / delta) * sb / (p0min * gap);
  if (m.n1_dim() == 0) return w;
  const double den = hermitian_max_eig((b1 * g.K0).adjoint() * P1 * (b1 * g.K0));
  if (!(den > 0.0)) throw ModelError("zero denominator: K0^* B1^* P1 B1 K0 vanishes");
  w.beta = delta * sb / (gap * den);
  const CMat gg = detail::output_injection(g);
  const double c1term = hermitian_max_eig((gg * m.C1).adjoint() * P0 * (gg * m.C1));
  w.gamma = 4.0 * w.alpha * c1term / (delta * delta * hermitian_min_eig(P1));
  return w;
}

inline double rho(const SpectralModel& m, const TailSums& sums, const CMat& P0) {
  const auto floor = detail::stable_floor(m);
  if (!floor || m.n0() == 0) return 0.0;
  const double a1 = std::abs(*floor);
  const double delta = m.delta;
  const double gap = a1 - delta;
  if (!(gap > 0.0)) {
    throw ModelError("tail too slow: |sigma_min(A1)| = " + std::to_string(a1) +
                     " <= delta = " + std::to_string(delta));
  }
  return 16.0 * sums.S_b * sums.S_c / (delta * delta * hermitian_min_eig(P0) * gap * a1);
}

namespace detail {

inline void require_pairs(const SpectralModel& m, const char* who) {
  if (m.n0() == 0) return;
  if (!is_controllable(m.A0, m.B0)) {
    throw ModelError(std::string(who) + ": pair (A0, B0) is not controllable");
  }
  if (!is_observable(m.A0, m.C0)) {
    throw ModelError(std::string(who) + ": pair (C0, A0) is not observable");
  }
}

inline void check_lyapunov(const SpectralModel& m, const Gains& g, const CMat& P0,
                           const CMat& P1) {
  auto holds = [&](const CMat& p, const CMat& f) {
    if (p.rows() != f.rows() || p.cols() != f.cols()) return false;
    if (p.size() == 0) return true;
    const CMat lhs = p * f + f.adjoint() * p + 2.0 * m.delta * p;
    return hermitian_max_eig(lhs) < -1e-10 && hermitian_min_eig(p) > 0.0;
  };
  if (!holds(P0, assemble_F0(m, g))) {
    throw ModelError("certificate: P0 does not satisfy the shifted Lyapunov inequality");
  }
  if (!holds(P1, m.A1)) {
    throw ModelError("certificate: P1 does not satisfy the shifted Lyapunov inequality");
  }
}

}  // namespace detail

inline Certificate certify_exact(const SpectralModel& m, const Gains& g, const CMat& P0,
                                 const CMat& P1) {
  detail::require_pairs(m, "certify_exact");
  detail::check_lyapunov(m, g, P0, P1);
  const TailSums sums = tail_sums(m, g, P0);
  const Weights w = weights(m, g, P0, P1, sums, m.B1);
  Certificate c;
  c.delta = m.delta;
  c.alpha = w.alpha;
  c.beta = w.beta;
  c.gamma = w.gamma;
  c.S_b = sums.S_b;
  c.S_c = sums.S_c;
  c.tail_inconclusive = sums.inconclusive;
  c.rho = rho(m, sums, P0);
  c.certified_rate = m.delta;
  c.satisfied = c.rho <= 1.0 && c.eta < m.delta;
  return c;
}

struct EtaComponents {
  double eta0 = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double max() const { return std::max({eta0, eta1, eta2}); }
};

/// F~0 = [-G0 C~0, -G0 C~0; A~0 + B~0 K0 + G0 C~0, A~0 + G0 C~0].
inline CMat assemble_F0_tilde(const Gains& g, const UncertaintySpec& u) {
  const Eigen::Index n0 = u.dA0.rows();
  CMat f(2 * n0, 2 * n0);
  const CMat gc = g.G0 * u.dC0;
  f.topLeftCorner(n0, n0) = -gc;
  f.topRightCorner(n0, n0) = -gc;
  f.bottomLeftCorner(n0, n0) = u.dA0 + u.dB0 * g.K0 + gc;
  f.bottomRightCorner(n0, n0) = u.dA0 + gc;
  return f;
}

/// Mismatch terms for fixed weights.
inline EtaComponents eta_components(const Gains& g, const UncertaintySpec& u, const CMat& P0,
                                    const CMat& P1, const Weights& w) {
  const CMat gg = detail::output_injection(g);
  const double f0 = spectral_norm(assemble_F0_tilde(g, u));
  const double a1 = spectral_norm(u.dA1);
  const CMat gc1 = gg * u.dC1;
  const double c1 = hermitian_max_eig(gc1.adjoint() * P0 * gc1);
  const CMat bk = u.dB1 * g.K0;
  const double b1 = hermitian_max_eig(bk.adjoint() * P1 * bk);
  const double p0min = hermitian_min_eig(P0);
  const double p1min = hermitian_min_eig(P1);
  EtaComponents e;
  e.eta0 = 2.0 * f0 + c1;
  if (w.gamma * b1 > 0.0) e.eta0 += w.gamma * b1 / (w.alpha * p0min);
  e.eta1 = 2.0 * a1;
  if (w.beta > 0.0) {
    e.eta1 += (w.gamma / w.beta) * a1;
    if (w.alpha * c1 > 0.0) e.eta1 += w.alpha * c1 / (w.beta * p1min);
  }
  e.eta2 = b1 + a1;
  return e;
}

/// Certificate for a controller built on `hat` when the plant is
/// `hat` + `u`. P0 solves the shifted inequality for the knowledge F0.
inline Certificate certify_uncertain(const SpectralModel& hat, const UncertaintySpec& u,
                                     const Gains& g, const CMat& P0, const CMat& P1) {
  check_uncertainty(hat, u);
  detail::require_pairs(hat, "certify_uncertain");
  detail::check_lyapunov(hat, g, P0, P1);
  const TailSums sums = tail_sums(hat, g, P0);
  const Weights w = weights(hat, g, P0, P1, sums, hat.B1);
  if (!(w.alpha > 0.0)) throw ModelError("alpha zero in eta0 denominator");
  const EtaComponents e = eta_components(g, u, P0, P1, w);
  Certificate c;
  c.delta = hat.delta;
  c.alpha = w.alpha;
  c.beta = w.beta;
  c.gamma = w.gamma;
  c.S_b = sums.S_b;
  c.S_c = sums.S_c;
  c.tail_inconclusive = sums.inconclusive;
  c.rho = rho(hat, sums, P0);
  c.eta0 = e.eta0;
  c.eta1 = e.eta1;
  c.eta2 = e.eta2;
  c.eta = e.max();
  c.certified_rate = hat.delta - c.eta;
  c.satisfied = c.rho <= 1.0 && c.eta < hat.delta;
  return c;
}

// ---------------------------------------------------------------------------
// Controller

namespace detail {

/// Conjugate partners inside a block: diagonal blocks pair entries whose
/// eigenvalues are conjugate; other blocks must be real and pair trivially.
inline void block_partners(const CMat& a, Eigen::Index offset, std::vector<Eigen::Index>& out) {
  const Eigen::Index n = a.rows();
  if (n == 0) return;
  if (!is_diagonal(a)) {
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(offset + i);
    return;
  }
  const double tol = 1e-10 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> p(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const cd s = a(i, i);
    if (std::abs(s.imag()) <= tol) {
      p[static_cast<std::size_t>(i)] = i;
      continue;
    }
    if (p[static_cast<std::size_t>(i)] >= 0) continue;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (p[static_cast<std::size_t>(j)] < 0 && std::abs(a(j, j) - std::conj(s)) <= tol) {
        p[static_cast<std::size_t>(i)] = j;
        p[static_cast<std::size_t>(j)] = i;
        break;
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index q = p[static_cast<std::size_t>(i)];
    out.push_back(q < 0 ? -1 : offset + q);
  }
}

}  // namespace detail

/// L = [A0 + G0 C0, G0 C1; 0, A1], M = [-G0; 0], N = [B0; B1], K = [K0, 0],
/// all from the model the gains were designed on.
inline ControllerRealization assemble_controller(const SpectralModel& m, const Gains& g) {
  const Eigen::Index n0 = m.n0();
  const Eigen::Index n1 = m.n1_dim();
  const Eigen::Index n = n0 + n1;
  if (g.K0.rows() != m.n_u() || g.K0.cols() != n0 || g.G0.rows() != n0 ||
      g.G0.cols() != m.n_y()) {
    throw ModelError("assemble_controller: gain dimensions " + detail::dims(g.K0) + " and " +
                     detail::dims(g.G0) + " do not match the model");
  }
  ControllerRealization c;
  c.L = CMat::Zero(n, n);
  c.L.topLeftCorner(n0, n0) = m.A0 + g.G0 * m.C0;
  c.L.topRightCorner(n0, n1) = g.G0 * m.C1;
  c.L.bottomRightCorner(n1, n1) = m.A1;
  c.M = CMat::Zero(n, m.n_y());
  c.M.topRows(n0) = -g.G0;
  c.Nmat = CMat::Zero(n, m.n_u());
  c.Nmat.topRows(n0) = m.B0;
  c.Nmat.bottomRows(n1) = m.B1;
  c.K = CMat::Zero(m.n_u(), n);
  c.K.leftCols(n0) = g.K0;
  detail::block_partners(m.A0, 0, c.partner);
  detail::block_partners(m.A1, n0, c.partner);
  return c;
}

/// K (sI - L)^{-1} M, the controller transfer from y to u.
inline CMat controller_transfer(const ControllerRealization& c, cd s) {
  const Eigen::Index n = c.L.rows();
  if (n == 0) return CMat::Zero(c.K.rows(), c.M.cols());
  const CMat r = s * CMat::Identity(n, n) - c.L;
  return c.K * r.partialPivLu().solve(c.M);
}

/// Real coordinates: each conjugate pair (x_i, x_j) becomes
/// x_i = r_i - i r_j, x_j = r_i + i r_j.
inline ControllerRealization realify(const ControllerRealization& c) {
  const Eigen::Index n = c.L.rows();
  const double scale = std::max({1.0, c.L.cwiseAbs().maxCoeff(),
                                 c.M.size() ? c.M.cwiseAbs().maxCoeff() : 0.0,
                                 c.Nmat.size() ? c.Nmat.cwiseAbs().maxCoeff() : 0.0,
                                 c.K.size() ? c.K.cwiseAbs().maxCoeff() : 0.0});
  const double tol = 1e-12 * scale;
  auto all_real = [&](const ControllerRealization& x) {
    return is_real(x.L, tol) && is_real(x.M, tol) && is_real(x.Nmat, tol) && is_real(x.K, tol);
  };
  auto strip = [](ControllerRealization x) {
    x.L = x.L.real().cast<cd>();
    x.M = x.M.real().cast<cd>();
    x.Nmat = x.Nmat.real().cast<cd>();
    x.K = x.K.real().cast<cd>();
    x.representation = Representation::RealifiedBlockDiagonal;
    x.partner.clear();
    for (Eigen::Index i = 0; i < x.L.rows(); ++i) x.partner.push_back(i);
    return x;
  };
  if (n > 0) {
    // Spectrum must be closed under conjugation.
    const CVec ev = eigenvalues(c.L);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    const double etol = 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      bool found = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!used[static_cast<std::size_t>(j)] && j != i &&
            std::abs(ev(j) - std::conj(ev(i))) <= etol) {
          used[static_cast<std::size_t>(j)] = true;
          found = true;
          break;
        }
      }
      if (!found && std::abs(ev(i).imag()) > etol) {
        throw ModelError("unpaired complex mode in controller spectrum: " +
                         detail::fmt_cd(ev(i)));
      }
      used[static_cast<std::size_t>(i)] = true;
    }
  }
  if (all_real(c)) return strip(c);
  if (static_cast<Eigen::Index>(c.partner.size()) != n) {
    throw ModelError("realify: complex controller without conjugate pairing information");
  }
  CMat s = CMat::Zero(n, n);
  const cd I(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = c.partner[static_cast<std::size_t>(i)];
    if (j < 0) throw ModelError("unpaired complex mode at controller coordinate " + std::to_string(i));
    if (j == i) {
      s(i, i) = 1.0;
    } else if (i < j) {
      s(i, i) = 1.0;
      s(i, j) = -I;
      s(j, i) = 1.0;
      s(j, j) = I;
    }
  }
  const Eigen::PartialPivLU<CMat> lu(s);
  ControllerRealization r;
  r.L = lu.solve(c.L * s);
  r.M = lu.solve(c.M);
  r.Nmat = lu.solve(c.Nmat);
  r.K = c.K * s;
  r.partner = c.partner;
  if (!all_real(r)) {
    throw ModelError("realify: controller data are not conjugate-symmetric in the paired coordinates");
  }
  return strip(r);
}

}  // namespace specctrl

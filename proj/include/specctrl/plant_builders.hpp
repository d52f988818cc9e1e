#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/LU>

#include "specctrl/linalg.hpp"
#include "specctrl/spectral_model.hpp"
#include "specctrl/types.hpp"

namespace specctrl {

struct Transport {
  double h;
};

struct ReactionDiffusion {
  double nu;
  double lambda;
};

/// ODE coupled at the boundary with a 1-D PDE on theta in (0, 1).
///
/// Transport:          x' = A x + B z(t,0) + Bu u,  z_t = z_theta / h,  z(t,1) = C x.
/// Reaction-diffusion: x' = A x + B z_theta(t,1) + Bu u,
///                     z_t = nu z_thetatheta + lambda z,  z(t,0) = C x,  z(t,1) = 0.
/// In both cases y = Cy x.
struct OdePdePlant {
  RMat A, B, Bu, C, Cy;
  std::variant<Transport, ReactionDiffusion> kind;

  Eigen::Index n_x() const { return A.rows(); }
};

inline void check_plant(const OdePdePlant& p) {
  const Eigen::Index n = p.A.rows();
  if (p.A.cols() != n || n == 0) throw ModelError("plant: A must be square and nonempty");
  if (p.B.rows() != n || p.B.cols() != 1) throw ModelError("plant: B must be n_x x 1");
  if (p.Bu.rows() != n || p.Bu.cols() < 1) throw ModelError("plant: Bu must be n_x x n_u");
  if (p.C.rows() != 1 || p.C.cols() != n) throw ModelError("plant: C must be 1 x n_x");
  if (p.Cy.cols() != n || p.Cy.rows() < 1) throw ModelError("plant: Cy must be n_y x n_x");
  if (const auto* t = std::get_if<Transport>(&p.kind)) {
    if (!(t->h > 0.0)) throw ModelError("plant: transport delay h must be positive");
  } else {
    const auto& rd = std::get<ReactionDiffusion>(p.kind);
    if (!(rd.nu > 0.0)) throw ModelError("plant: diffusion coefficient nu must be positive");
    if (!std::isfinite(rd.lambda)) throw ModelError("plant: lambda must be finite");
  }
}

/// SISO realization H_N(s) = C (sI - A)^{-1} B + D.
struct RationalApprox {
  int order = 0;
  RMat A, B, C;
  double D = 0.0;

  cd evaluate(cd s) const {
    const CMat m = s * CMat::Identity(order, order) - A.cast<cd>();
    const CVec x = m.partialPivLu().solve(B.cast<cd>().col(0));
    return (C.cast<cd>() * x)(0) + D;
  }
};

/// Result of closing the ODE around a rational PDE surrogate.
struct ApproximatedPlant {
  RMat A, B, C;
};

// ---------------------------------------------------------------------------
// Toy system

/// Two unstable modes 0.5 +- 2i in real rotation form, a diagonal stable block
/// diag(-1, ..., -n1^2) and tail modes a_i = -(n1 + i)^2, all couplings one.
inline SpectralModel build_toy(Eigen::Index n1_dim, Eigen::Index n_tail, double delta = 0.5) {
  if (n1_dim < 0 || n_tail < 0) throw ModelError("build_toy: negative block size");
  SpectralModel m;
  m.delta = delta;
  m.A0.resize(2, 2);
  m.A0 << cd(0.5), cd(2.0), cd(-2.0), cd(0.5);
  m.B0 = CMat::Ones(2, 1);
  m.C0 = CMat::Ones(1, 2);
  m.A1 = CMat::Zero(n1_dim, n1_dim);
  for (Eigen::Index k = 0; k < n1_dim; ++k) {
    m.A1(k, k) = -static_cast<double>((k + 1) * (k + 1));
  }
  m.B1 = CMat::Ones(n1_dim, 1);
  m.C1 = CMat::Ones(1, n1_dim);
  m.tail.reserve(static_cast<std::size_t>(n_tail));
  for (Eigen::Index i = 1; i <= n_tail; ++i) {
    const double k = static_cast<double>(n1_dim + i);
    m.tail.push_back(ModalTriple{cd(-k * k), CRow::Ones(1), CVec::Ones(1)});
  }
  return m;
}

// ---------------------------------------------------------------------------
// Rational surrogates

namespace detail {

/// Controllable canonical realization of num(s)/den(s); coefficients in
/// ascending powers, deg num <= deg den = N.
inline RationalApprox realize_controllable(const std::vector<double>& num,
                                           const std::vector<double>& den) {
  const int n = static_cast<int>(den.size()) - 1;
  const double lead = den.back();
  RationalApprox r;
  r.order = n;
  r.D = num.size() == den.size() ? num.back() / lead : 0.0;
  r.A = RMat::Zero(n, n);
  r.B = RMat::Zero(n, 1);
  r.C = RMat::Zero(1, n);
  for (int i = 0; i + 1 < n; ++i) r.A(i, i + 1) = 1.0;
  for (int k = 0; k < n; ++k) {
    r.A(n - 1, k) = -den[static_cast<std::size_t>(k)] / lead;
    const double nk = k < static_cast<int>(num.size()) ? num[static_cast<std::size_t>(k)] : 0.0;
    r.C(0, k) = nk / lead - r.D * den[static_cast<std::size_t>(k)] / lead;
  }
  r.B(n - 1, 0) = 1.0;
  return r;
}

}  // namespace detail

inline constexpr int kMaxPadeOrder = 20;

/// Diagonal [N/N] Pade approximant of exp(-h s) in controllable canonical form.
inline RationalApprox pade_exp(int order, double h) {
  if (order < 1 || order > kMaxPadeOrder) {
    throw ModelError("pade_exp: order must be in [1, " + std::to_string(kMaxPadeOrder) + "]");
  }
  if (!(h > 0.0)) throw ModelError("pade_exp: delay must be positive");
  // c_k = (2N-k)! N! / ((2N)! k! (N-k)!) built by ratio to avoid factorials.
  std::vector<double> num(static_cast<std::size_t>(order + 1));
  std::vector<double> den(static_cast<std::size_t>(order + 1));
  double c = 1.0;
  double hk = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) {
      c *= static_cast<double>(order - k + 1) /
           (static_cast<double>(k) * static_cast<double>(2 * order - k + 1));
      hk *= h;
    }
    den[static_cast<std::size_t>(k)] = c * hk;
    num[static_cast<std::size_t>(k)] = (k % 2 == 0 ? 1.0 : -1.0) * c * hk;
  }
  return detail::realize_controllable(num, den);
}

/// Frequency below which |H_N(i w) - exp(-i h w)| <= 1e-6, from the leading
/// term (N!)^2 / ((2N)! (2N+1)!) |h w|^{2N+1} of the Pade remainder with a
/// safety factor of one half.
inline double pade_validity_radius(int order, double h) {
  double log_coef = 0.0;  // log((N!)^2 / ((2N)! (2N+1)!))
  for (int k = 1; k <= order; ++k) log_coef += 2.0 * std::log(static_cast<double>(k));
  for (int k = 1; k <= 2 * order; ++k) log_coef -= std::log(static_cast<double>(k));
  for (int k = 1; k <= 2 * order + 1; ++k) log_coef -= std::log(static_cast<double>(k));
  const double x = std::exp((std::log(0.5e-6) - log_coef) / (2.0 * order + 1.0));
  return x / h;
}

/// Order-N rational approximation of H(s) = mu / sinh(mu), mu^2 = (s - lambda) / nu.
///
/// Uses the partial-fraction expansion
///   H = 1 + 2 sum_k (-1)^k mu^2 / (mu^2 + k^2 pi^2),
/// truncated after N terms, with the last residue enlarged by the
/// low-frequency content of the dropped terms. Poles sit exactly at
/// lambda - nu k^2 pi^2 and H_N(lambda) = 1.
inline RationalApprox rational_diffusion(int order, double nu, double lambda) {
  if (order < 1 || order > 50) throw ModelError("rational_diffusion: order must be in [1, 50]");
  if (!(nu > 0.0)) throw ModelError("rational_diffusion: nu must be positive");
  constexpr double pi = std::numbers::pi;
  // sum_{k>N} (-1)^k / k^2 = -pi^2/12 - sum_{k<=N} (-1)^k / k^2
  double partial = 0.0;
  for (int k = 1; k <= order; ++k) {
    partial += (k % 2 == 0 ? 1.0 : -1.0) / (static_cast<double>(k) * k);
  }
  const double dropped = -pi * pi / 12.0 - partial;

  RationalApprox r;
  r.order = order;
  r.A = RMat::Zero(order, order);
  r.B = RMat::Ones(order, 1);
  r.C = RMat::Zero(1, order);
  r.D = 1.0;
  for (int k = 1; k <= order; ++k) {
    const double kk = static_cast<double>(k) * k * pi * pi;
    double rho = 2.0 * (k % 2 == 0 ? 1.0 : -1.0);
    if (k == order) rho += 2.0 * dropped / (pi * pi) * kk;
    // rho * w / (w + k^2 pi^2) = rho - rho nu k^2 pi^2 / (s - p_k)
    r.A(k - 1, k - 1) = lambda - nu * kk;
    r.C(0, k - 1) = -rho * nu * kk;
    r.D += rho;
  }
  return r;
}

inline RationalApprox negated(RationalApprox r) {
  r.C = -r.C;
  r.D = -r.D;
  return r;
}

/// Rational surrogate of the map from the boundary value C x to the signal
/// entering the ODE through B: exp(-h s) for transport, and the Neumann flux
/// -mu / sinh(mu) for reaction-diffusion.
inline RationalApprox boundary_transfer(const OdePdePlant& plant, int order) {
  if (const auto* t = std::get_if<Transport>(&plant.kind)) return pade_exp(order, t->h);
  const auto& rd = std::get<ReactionDiffusion>(plant.kind);
  return negated(rational_diffusion(order, rd.nu, rd.lambda));
}

/// Block interconnection [A + B D C, B C_N; B_N C, A_N], input [Bu; 0],
/// output [Cy, 0].
inline ApproximatedPlant interconnect(const OdePdePlant& plant, const RationalApprox& approx) {
  check_plant(plant);
  const Eigen::Index n = plant.n_x();
  const Eigen::Index N = approx.order;
  if (approx.A.rows() != N || approx.A.cols() != N || approx.B.rows() != N ||
      approx.B.cols() != 1 || approx.C.rows() != 1 || approx.C.cols() != N) {
    throw ModelError("interconnect: rational approximation has inconsistent dimensions");
  }
  ApproximatedPlant out;
  out.A = RMat::Zero(n + N, n + N);
  out.A.topLeftCorner(n, n) = plant.A + approx.D * plant.B * plant.C;
  out.A.topRightCorner(n, N) = plant.B * approx.C;
  out.A.bottomLeftCorner(N, n) = approx.B * plant.C;
  out.A.bottomRightCorner(N, N) = approx.A;
  out.B = RMat::Zero(n + N, plant.Bu.cols());
  out.B.topRows(n) = plant.Bu;
  out.C = RMat::Zero(plant.Cy.rows(), n + N);
  out.C.leftCols(n) = plant.Cy;
  return out;
}

inline ApproximatedPlant approximate(const OdePdePlant& plant, int order) {
  return interconnect(plant, boundary_transfer(plant, order));
}

// ---------------------------------------------------------------------------
// Modal form

/// Sorted eigendecomposition of a real matrix. `vectors` are right
/// eigenvectors in the original coordinates, `inverse` is their inverse.
/// Columns have unit norm in the balanced coordinates and their largest
/// entry is real positive there.
struct ModalDecomposition {
  CVec values;
  CMat vectors;
  CMat inverse;
  double condition = 1.0;  // of the balanced unit-column eigenvector matrix
};

inline ModalDecomposition modal_decomposition(const RMat& a) {
  if (a.rows() != a.cols()) throw ModelError("modal_decomposition: matrix is not square");
  const RVec d = balancing_scale(a);
  const RMat ab = d.cwiseInverse().asDiagonal() * a * d.asDiagonal();
  Eigen::EigenSolver<RMat> solver(ab, true);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("modal_decomposition: eigensolver did not converge");
  }
  const CVec ev = solver.eigenvalues();
  const CMat vb = solver.eigenvectors();
  const auto order = mode_order(ev);

  const Eigen::Index n = a.rows();
  ModalDecomposition out;
  out.values.resize(n);
  CMat v(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.values(j) = ev(src);
    CVec col = vb.col(src);
    col.normalize();
    Eigen::Index imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    col *= std::conj(col(imax)) / std::abs(col(imax));
    col(imax) = cd(col(imax).real(), 0.0);
    v.col(j) = col;
  }
  out.condition = condition_number(v);
  if (!(out.condition <= kMaxEigenvectorCondition)) {
    throw NumericalError("near-defective spectrum: eigenvector condition number " +
                         std::to_string(out.condition));
  }
  const CMat vinv = v.partialPivLu().inverse();
  out.vectors = d.cast<cd>().asDiagonal() * v;
  out.inverse = vinv * d.cwiseInverse().cast<cd>().asDiagonal();
  return out;
}

/// Diagonalizes (A_hat, B_hat, C_hat), orders the modes and splits them into
/// (A0, A1, tail). A conjugate pair is never split across blocks: the
/// stable block grows by one mode if needed. `n_tail` defaults to every
/// remaining mode.
inline SpectralModel to_spectral(const RMat& a_hat, const RMat& b_hat, const RMat& c_hat,
                                 double delta, Eigen::Index extra_stable,
                                 std::optional<Eigen::Index> n_tail = std::nullopt) {
  const Eigen::Index n = a_hat.rows();
  if (b_hat.rows() != n || c_hat.cols() != n) {
    throw ModelError("to_spectral: dimension mismatch between A_hat, B_hat and C_hat");
  }
  const ModalDecomposition md = modal_decomposition(a_hat);
  std::vector<cd> eigs(md.values.data(), md.values.data() + md.values.size());
  ModelSplit split = split_at(eigs, delta, extra_stable);
  Eigen::Index n1 = split.n1_dim;
  const Eigen::Index end = split.n0 + n1;
  if (n1 > 0 && end < n && eigs[end - 1].imag() != 0.0 &&
      eigs[end] == std::conj(eigs[end - 1])) {
    ++n1;
  }
  const Eigen::Index start_tail = split.n0 + n1;
  const Eigen::Index remaining = n - start_tail;
  const Eigen::Index nt = n_tail.value_or(remaining);
  if (split.n0 + extra_stable + nt > n || nt > remaining || nt < 0) {
    throw ModelError("to_spectral: n0 + extra_stable + n_tail exceeds the model order " +
                     std::to_string(n));
  }

  const CMat bm = md.inverse * b_hat.cast<cd>();
  const CMat cm = c_hat.cast<cd>() * md.vectors;

  SpectralModel m;
  m.delta = delta;
  const Eigen::Index n0 = split.n0;
  m.A0 = md.values.head(n0).asDiagonal();
  m.A1 = md.values.segment(n0, n1).asDiagonal();
  m.B0 = bm.topRows(n0);
  m.B1 = bm.middleRows(n0, n1);
  m.C0 = cm.leftCols(n0);
  m.C1 = cm.middleCols(n0, n1);
  m.tail.reserve(static_cast<std::size_t>(nt));
  for (Eigen::Index i = start_tail; i < start_tail + nt; ++i) {
    m.tail.push_back(ModalTriple{md.values(i), bm.row(i), cm.col(i)});
  }
  return m;
}

// ---------------------------------------------------------------------------
// Characteristic vectors

/// Characteristic vector sampled on a uniform theta grid: `ode` is the
/// finite-dimensional part, `pde` the distributed part at each theta.
struct EigenvectorSample {
  cd s;
  CVec ode;
  RVec theta;
  CVec pde;
};

/// Adjugate by cofactors; defined for singular matrices too.
inline CMat adjugate(const CMat& m) {
  const Eigen::Index n = m.rows();
  if (n == 1) return CMat::Ones(1, 1);
  CMat adj(n, n);
  CMat minor(n - 1, n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
        if (r == i) continue;
        for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
          if (c == j) continue;
          minor(rr, cc++) = m(r, c);
        }
        ++rr;
      }
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      adj(j, i) = sign * minor.determinant();
    }
  }
  return adj;
}

namespace detail {

inline RVec theta_grid(Eigen::Index grid) {
  if (grid < 2) throw ModelError("eigenvector sample: grid needs at least two points");
  return RVec::LinSpaced(grid, 0.0, 1.0);
}

inline CVec adj_b(const OdePdePlant& p, cd s) {
  const CMat m = s * CMat::Identity(p.n_x(), p.n_x()) - p.A.cast<cd>();
  return adjugate(m) * p.B.cast<cd>();
}

}  // namespace detail

/// v(theta) = [adj(sI - A) B; C adj(sI - A) B exp(h s (theta - 1))].
inline EigenvectorSample eigvec_transport(cd s, const OdePdePlant& plant, Eigen::Index grid) {
  const auto* t = std::get_if<Transport>(&plant.kind);
  if (t == nullptr) throw ModelError("eigvec_transport: plant is not a transport interconnection");
  EigenvectorSample out;
  out.s = s;
  out.theta = detail::theta_grid(grid);
  out.ode = detail::adj_b(plant, s);
  const cd boundary = (plant.C.cast<cd>() * out.ode)(0);
  out.pde.resize(grid);
  for (Eigen::Index k = 0; k < grid; ++k) {
    out.pde(k) = boundary * std::exp(t->h * s * (out.theta(k) - 1.0));
  }
  return out;
}

/// v(theta) = [adj(sI - A) B sinh(mu); C adj(sI - A) B sinh(mu (1 - theta))],
/// mu the principal root of (s - lambda) / nu. `flip_branch` uses -mu.
inline EigenvectorSample eigvec_diffusion(cd s, const OdePdePlant& plant, Eigen::Index grid,
                                          bool flip_branch = false) {
  const auto* rd = std::get_if<ReactionDiffusion>(&plant.kind);
  if (rd == nullptr) throw ModelError("eigvec_diffusion: plant is not a reaction-diffusion interconnection");
  cd mu = std::sqrt((s - rd->lambda) / rd->nu);
  if (flip_branch) mu = -mu;
  EigenvectorSample out;
  out.s = s;
  out.theta = detail::theta_grid(grid);
  const CVec ab = detail::adj_b(plant, s);
  out.ode = ab * std::sinh(mu);
  const cd cab = (plant.C.cast<cd>() * ab)(0);
  out.pde.resize(grid);
  for (Eigen::Index k = 0; k < grid; ++k) {
    out.pde(k) = cab * std::sinh(mu * (1.0 - out.theta(k)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Independent eigenvalue oracles

struct OracleResult {
  std::vector<cd> eigenvalues;  // mode order
  int failed_seeds = 0;
};

namespace detail {

inline std::vector<cd> rightmost(std::vector<cd> v, std::size_t how_many) {
  // Roots of a real characteristic function come in conjugate pairs; make
  // each pair exact so that the mode order is well defined.
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].imag() <= 0.0) continue;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (j != i && std::abs(v[j] - std::conj(v[i])) <= 1e-8 * std::max(1.0, std::abs(v[i]))) {
        v[j] = std::conj(v[i]);
        break;
      }
    }
  }
  std::sort(v.begin(), v.end(), mode_before);
  if (v.size() > how_many) v.resize(how_many);
  return v;
}

/// Newton iteration on det(sI - A - exp(-h s) B C) from a 20 x 20 seed grid
/// over Re in [-15, 3], Im in [-40, 40].
inline OracleResult transport_roots(const OdePdePlant& p, double h) {
  const Eigen::Index n = p.n_x();
  const CMat a = p.A.cast<cd>();
  const CMat bc = (p.B * p.C).cast<cd>();
  const CMat id = CMat::Identity(n, n);
  OracleResult out;
  std::vector<cd> roots;
  constexpr int grid = 20;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      cd s(-15.0 + 18.0 * i / (grid - 1), -40.0 + 80.0 * j / (grid - 1));
      bool converged = false;
      for (int it = 0; it < 100; ++it) {
        const cd e = std::exp(-h * s);
        const CMat m = s * id - a - e * bc;
        const CMat dm = id + h * e * bc;
        Eigen::PartialPivLU<CMat> lu(m);
        const cd det = lu.determinant();
        if (det == cd(0.0)) {
          converged = true;
          break;
        }
        // f / f' = 1 / tr(M^{-1} M')
        const cd tr = lu.solve(dm).trace();
        const cd step = 1.0 / tr;
        s -= step;
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) break;
        if (std::abs(step) < 1e-13 * (1.0 + std::abs(s))) {
          converged = true;
          break;
        }
      }
      if (!converged) {
        ++out.failed_seeds;
        continue;
      }
      const bool dup = std::any_of(roots.begin(), roots.end(),
                                   [&](const cd& r) { return std::abs(r - s) < 1e-6; });
      if (!dup) roots.push_back(s);
    }
  }
  out.eigenvalues = std::move(roots);
  return out;
}

/// Second-order central differences on `resolution` intervals, Dirichlet
/// ends z(0) = C x, z(1) = 0, and a one-sided second-order flux at theta = 1.
inline RMat diffusion_fd_matrix(const OdePdePlant& p, const ReactionDiffusion& rd,
                                Eigen::Index resolution) {
  const Eigen::Index n = p.n_x();
  const Eigen::Index m = resolution - 1;  // interior nodes 1..M-1
  const double dx = 1.0 / static_cast<double>(resolution);
  const double k = rd.nu / (dx * dx);
  RMat a = RMat::Zero(n + m, n + m);
  a.topLeftCorner(n, n) = p.A;
  // x' += B (-4 z_{M-1} + z_{M-2}) / (2 dx)
  a.block(0, n + m - 1, n, 1) += p.B * (-4.0 / (2.0 * dx));
  if (m >= 2) a.block(0, n + m - 2, n, 1) += p.B * (1.0 / (2.0 * dx));
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index r = n + j;
    a(r, r) = -2.0 * k + rd.lambda;
    if (j > 0) a(r, r - 1) = k;
    if (j + 1 < m) a(r, r + 1) = k;
  }
  a.block(n, 0, 1, n) += k * p.C;
  return a;
}

}  // namespace detail

/// Rightmost `how_many` eigenvalues of the infinite-dimensional plant,
/// computed without any rational surrogate.
inline OracleResult oracle_eigs(const OdePdePlant& plant, Eigen::Index resolution,
                                std::size_t how_many) {
  check_plant(plant);
  if (resolution < 50) throw ModelError("oracle_eigs: resolution must be at least 50");
  if (const auto* t = std::get_if<Transport>(&plant.kind)) {
    OracleResult r = detail::transport_roots(plant, t->h);
    r.eigenvalues = detail::rightmost(std::move(r.eigenvalues), how_many);
    return r;
  }
  const auto& rd = std::get<ReactionDiffusion>(plant.kind);
  const RMat a = detail::diffusion_fd_matrix(plant, rd, resolution);
  Eigen::EigenSolver<RMat> solver(a, false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("oracle_eigs: eigensolver did not converge");
  }
  const CVec ev = solver.eigenvalues();
  OracleResult out;
  out.eigenvalues = detail::rightmost(std::vector<cd>(ev.data(), ev.data() + ev.size()), how_many);
  return out;
}

}  // namespace specctrl

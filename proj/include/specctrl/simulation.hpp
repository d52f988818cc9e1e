#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "specctrl/linalg.hpp"
#include "specctrl/spectral_model.hpp"
#include "specctrl/synthesis.hpp"
#include "specctrl/types.hpp"

namespace specctrl {

/// Offsets of the components (x_hat0, e0, x_hat1, e1, z) in the state.
struct StateLayout {
  Eigen::Index n0 = 0;
  Eigen::Index n1 = 0;
  Eigen::Index n_tail = 0;

  Eigen::Index xhat0() const { return 0; }
  Eigen::Index e0() const { return n0; }
  Eigen::Index xhat1() const { return 2 * n0; }
  Eigen::Index e1() const { return 2 * n0 + n1; }
  Eigen::Index z() const { return 2 * n0 + 2 * n1; }
  Eigen::Index size() const { return 2 * n0 + 2 * n1 + n_tail; }
};

struct ClosedLoopSystem {
  CMat Acl;
  StateLayout layout;
  std::optional<double> abscissa;  // sigma_max(Acl) when already known
};

inline double closed_loop_abscissa(ClosedLoopSystem& sys) {
  if (!sys.abscissa) sys.abscissa = spectral_abscissa(sys.Acl);
  return *sys.abscissa;
}

/// Closed loop of the controller designed on `hat` acting on the plant
/// `hat` + `uncertainty` (the knowledge model itself when absent).
inline ClosedLoopSystem assemble(const SpectralModel& hat, const Gains& g,
                                 const std::optional<UncertaintySpec>& uncertainty = std::nullopt) {
  const UncertaintySpec u = uncertainty.value_or(UncertaintySpec::zero_like(hat));
  check_uncertainty(hat, u);
  const Eigen::Index n0 = hat.n0();
  const Eigen::Index n1 = hat.n1_dim();
  const Eigen::Index nt = hat.n_tail();
  const Eigen::Index ny = hat.n_y();
  if (g.K0.rows() != hat.n_u() || g.K0.cols() != n0 || g.G0.rows() != n0 || g.G0.cols() != ny) {
    throw ModelError("assemble: gain dimensions " + detail::dims(g.K0) + " and " +
                     detail::dims(g.G0) + " do not match the model");
  }
  const CMat A0 = hat.A0 + u.dA0;
  const CMat A1 = hat.A1 + u.dA1;
  const CMat C0 = hat.C0 + u.dC0;
  const CMat C1 = hat.C1 + u.dC1;
  CMat ctail(ny, nt);
  for (Eigen::Index i = 0; i < nt; ++i) ctail.col(i) = hat.tail[static_cast<std::size_t>(i)].c;

  ClosedLoopSystem sys;
  sys.layout = StateLayout{n0, n1, nt};
  const StateLayout& l = sys.layout;
  CMat& a = sys.Acl;
  a = CMat::Zero(l.size(), l.size());
  const CMat gc0t = g.G0 * u.dC0;
  // x_hat0
  a.block(l.xhat0(), l.xhat0(), n0, n0) = hat.A0 + hat.B0 * g.K0 - gc0t;
  a.block(l.xhat0(), l.e0(), n0, n0) = -g.G0 * C0;
  a.block(l.xhat0(), l.xhat1(), n0, n1) = -g.G0 * u.dC1;
  a.block(l.xhat0(), l.e1(), n0, n1) = -g.G0 * C1;
  a.block(l.xhat0(), l.z(), n0, nt) = -g.G0 * ctail;
  // e0
  a.block(l.e0(), l.xhat0(), n0, n0) = u.dA0 + u.dB0 * g.K0 + gc0t;
  a.block(l.e0(), l.e0(), n0, n0) = A0 + g.G0 * C0;
  a.block(l.e0(), l.xhat1(), n0, n1) = g.G0 * u.dC1;
  a.block(l.e0(), l.e1(), n0, n1) = g.G0 * C1;
  a.block(l.e0(), l.z(), n0, nt) = g.G0 * ctail;
  // x_hat1
  a.block(l.xhat1(), l.xhat0(), n1, n0) = hat.B1 * g.K0;
  a.block(l.xhat1(), l.xhat1(), n1, n1) = hat.A1;
  // e1
  a.block(l.e1(), l.xhat0(), n1, n0) = u.dB1 * g.K0;
  a.block(l.e1(), l.xhat1(), n1, n1) = u.dA1;
  a.block(l.e1(), l.e1(), n1, n1) = A1;
  // z
  for (Eigen::Index i = 0; i < nt; ++i) {
    const auto& t = hat.tail[static_cast<std::size_t>(i)];
    a.block(l.z() + i, l.xhat0(), 1, n0) = t.b * g.K0;
    a(l.z() + i, l.z() + i) = t.a;
  }
  return sys;
}

/// Gains that leave the plant uncontrolled.
inline Gains zero_gains(const SpectralModel& m) {
  return Gains{CMat::Zero(m.n_u(), m.n0()), CMat::Zero(m.n0(), m.n_y()), {}, {}};
}

/// All-ones plant state in modal coordinates with the observer at zero, so
/// x_hat = 0 and e = x.
inline CVec default_initial_state(const StateLayout& l) {
  CVec x = CVec::Zero(l.size());
  x.segment(l.e0(), l.n0).setOnes();
  x.segment(l.e1(), l.n1).setOnes();
  x.segment(l.z(), l.n_tail).setOnes();
  return x;
}

/// Data defining the Lyapunov functional
/// V = alpha [x0; e0]^* P0 [x0; e0] + beta x1^* P1 x1 + gamma e1^* P1 e1 + |z|^2.
struct LyapunovWeights {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  CMat P0, P1;

  static LyapunovWeights from(const Certificate& c, const CMat& P0, const CMat& P1) {
    return LyapunovWeights{c.alpha, c.beta, c.gamma, P0, P1};
  }
};

struct Sample {
  double t = 0.0;
  double norm_xhat0 = 0.0;
  double norm_e0 = 0.0;
  double norm_xhat1 = 0.0;
  double norm_e1 = 0.0;
  double norm_z = 0.0;
  double V = std::numeric_limits<double>::quiet_NaN();
  double total_norm = 0.0;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<CVec> states;  // filled only on request
};

inline double lyapunov_value(const StateLayout& l, const CVec& x, const LyapunovWeights& w) {
  const CVec x0 = x.head(2 * l.n0);
  const CVec x1 = x.segment(l.xhat1(), l.n1);
  const CVec e1 = x.segment(l.e1(), l.n1);
  double v = x.segment(l.z(), l.n_tail).squaredNorm();
  if (l.n0 > 0) v += w.alpha * (x0.adjoint() * w.P0 * x0)(0).real();
  if (l.n1 > 0) {
    v += w.beta * (x1.adjoint() * w.P1 * x1)(0).real();
    v += w.gamma * (e1.adjoint() * w.P1 * e1)(0).real();
  }
  return v;
}

inline Sample sample_state(const StateLayout& l, double t, const CVec& x,
                           const std::optional<LyapunovWeights>& w) {
  Sample s;
  s.t = t;
  s.norm_xhat0 = x.segment(l.xhat0(), l.n0).norm();
  s.norm_e0 = x.segment(l.e0(), l.n0).norm();
  s.norm_xhat1 = x.segment(l.xhat1(), l.n1).norm();
  s.norm_e1 = x.segment(l.e1(), l.n1).norm();
  s.norm_z = x.segment(l.z(), l.n_tail).norm();
  s.total_norm = x.norm();
  if (w) s.V = lyapunov_value(l, x, *w);
  return s;
}

inline constexpr double kMaxExponentPerStep = 50.0;

/// Exact stepping x(t + dt) = exp(Acl dt) x(t).
inline Trajectory propagate(const ClosedLoopSystem& sys, const CVec& x_init, double t_end,
                            double dt, const std::optional<LyapunovWeights>& weights = std::nullopt,
                            bool keep_states = false) {
  if (!(dt > 0.0)) throw ModelError("propagate: dt must be positive");
  if (!(t_end >= dt)) throw ModelError("propagate: t_end must be at least dt");
  if (x_init.size() != sys.Acl.rows()) {
    throw ModelError("propagate: initial state has length " + std::to_string(x_init.size()) +
                     ", expected " + std::to_string(sys.Acl.rows()));
  }
  if (sys.Acl.size() > 0) {
    const double growth = (sys.abscissa ? *sys.abscissa : spectral_abscissa(sys.Acl)) * dt;
    if (growth > kMaxExponentPerStep) {
      throw NumericalError("propagate: sigma_max(Acl) * dt = " + std::to_string(growth) +
                           " exceeds " + std::to_string(kMaxExponentPerStep) +
                           "; reduce dt");
    }
  }
  const CMat step = (sys.Acl * dt).exp();
  if (!step.allFinite()) throw NumericalError("propagate: matrix exponential overflowed; reduce dt");
  const auto n_steps = static_cast<long>(std::llround(t_end / dt));
  Trajectory traj;
  traj.samples.reserve(static_cast<std::size_t>(n_steps + 1));
  CVec x = x_init;
  for (long k = 0; k <= n_steps; ++k) {
    if (k > 0) x = step * x;
    traj.samples.push_back(sample_state(sys.layout, static_cast<double>(k) * dt, x, weights));
    if (keep_states) traj.states.push_back(x);
  }
  return traj;
}

struct DecayFit {
  double rate = 0.0;
  double overshoot = 1.0;
  double t_start = 0.0;
  double t_end = 0.0;
  double residual = 0.0;
};

inline constexpr double kNormFloor = 1e-13;

/// Least-squares line through log(total norm) over the trailing fraction of
/// the samples; overshoot is max_t norm(t) e^{rate t} / norm(0), at least 1.
inline DecayFit fit_decay(const Trajectory& traj, double window_fraction = 0.5) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
    throw ModelError("fit_decay: window_fraction must be in (0, 1]");
  }
  const auto& s = traj.samples;
  if (s.empty()) throw ModelError("fit_decay: empty trajectory");
  const bool any_above = std::any_of(s.begin(), s.end(),
                                     [](const Sample& x) { return x.total_norm > kNormFloor; });
  if (!any_above) throw NumericalError("trajectory at numerical floor");
  const auto first =
      s.size() - std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(window_fraction * s.size())));
  std::vector<double> ts;
  std::vector<double> ys;
  for (std::size_t k = first; k < s.size(); ++k) {
    if (s[k].total_norm > kNormFloor) {
      ts.push_back(s[k].t);
      ys.push_back(std::log(s[k].total_norm));
    }
  }
  if (ts.size() < 10) {
    throw NumericalError("fit_decay: fewer than 10 samples above the numerical floor in the window");
  }
  Eigen::MatrixXd design(ts.size(), 2);
  Eigen::VectorXd rhs(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    design(static_cast<Eigen::Index>(k), 0) = 1.0;
    design(static_cast<Eigen::Index>(k), 1) = ts[k];
    rhs(static_cast<Eigen::Index>(k)) = ys[k];
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
  DecayFit fit;
  fit.rate = -coef(1);
  fit.t_start = ts.front();
  fit.t_end = ts.back();
  fit.residual = (design * coef - rhs).squaredNorm();
  const double n0 = s.front().total_norm;
  if (n0 > 0.0) {
    for (const auto& x : s) {
      fit.overshoot = std::max(fit.overshoot, x.total_norm * std::exp(fit.rate * x.t) / n0);
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Uncertainty sweep

struct SweepSettings {
  double magnitude = 0.1;
  int trials = 50;
  std::uint64_t seed = 0;
  double t_end = 20.0;
  double dt = 1e-2;
  double window_fraction = 0.5;
  int threads = 0;  // 0: SPECCTRL_THREADS or hardware concurrency
  bool keep_trajectories = false;
};

struct SweepTrial {
  int index = 0;
  UncertaintySpec uncertainty;  // true minus knowledge
  std::optional<DecayFit> fit;
  std::optional<Certificate> certificate;
  double closed_loop_abscissa = std::numeric_limits<double>::quiet_NaN();
  std::string error;
  Trajectory trajectory;  // only when requested

  bool stable() const { return closed_loop_abscissa < 0.0 && fit && fit->rate > 0.0; }
};

namespace detail {

inline CMat uniform_perturbation(Eigen::Index r, Eigen::Index c, double mag, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-mag, mag);
  CMat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      const double re = dist(rng);
      const double im = dist(rng);
      m(i, j) = cd(re, im);
    }
  }
  return m;
}

inline int sweep_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SPECCTRL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace detail

/// Draws the knowledge model for one trial: every entry of the finite blocks
/// is shifted by independent uniform real and imaginary parts in
/// [-magnitude, magnitude].
inline UncertaintySpec draw_uncertainty(const SpectralModel& m, double magnitude,
                                        std::uint64_t seed, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  UncertaintySpec knowledge_shift{
      detail::uniform_perturbation(m.n0(), m.n0(), magnitude, rng),
      detail::uniform_perturbation(m.n1_dim(), m.n1_dim(), magnitude, rng),
      detail::uniform_perturbation(m.n0(), m.n_u(), magnitude, rng),
      detail::uniform_perturbation(m.n1_dim(), m.n_u(), magnitude, rng),
      detail::uniform_perturbation(m.n_y(), m.n0(), magnitude, rng),
      detail::uniform_perturbation(m.n_y(), m.n1_dim(), magnitude, rng)};
  // true - knowledge
  return knowledge_shift.scaled(-1.0);
}

inline SweepTrial run_trial(const SpectralModel& truth, const std::vector<cd>& controller_poles,
                            const std::vector<cd>& observer_poles, const SweepSettings& cfg,
                            int index) {
  SweepTrial trial;
  trial.index = index;
  trial.uncertainty = draw_uncertainty(truth, cfg.magnitude, cfg.seed, index);
  try {
    const SpectralModel hat = apply_uncertainty(truth, trial.uncertainty.scaled(-1.0));
    const Gains g = synthesize_gains(hat, controller_poles, observer_poles);
    ClosedLoopSystem sys = assemble(hat, g, trial.uncertainty);
    trial.closed_loop_abscissa = closed_loop_abscissa(sys);
    std::optional<LyapunovWeights> w;
    try {
      const LyapunovPair lp = solve_lyapunov_pair(hat, g);
      trial.certificate = certify_uncertain(hat, trial.uncertainty, g, lp.P0, lp.P1);
      w = LyapunovWeights::from(*trial.certificate, lp.P0, lp.P1);
    } catch (const Error& e) {
      trial.error = std::string("certificate: ") + e.what();
    }
    Trajectory traj = propagate(sys, default_initial_state(sys.layout), cfg.t_end, cfg.dt, w);
    trial.fit = fit_decay(traj, cfg.window_fraction);
    if (cfg.keep_trajectories) trial.trajectory = std::move(traj);
  } catch (const Error& e) {
    if (!trial.error.empty()) trial.error += "; ";
    trial.error += e.what();
  }
  return trial;
}

/// Independent seeded trials; each trial's random stream depends only on
/// (seed, trial index), so the output does not depend on the thread count.
inline std::vector<SweepTrial> uncertainty_sweep(const SpectralModel& truth,
                                                 const std::vector<cd>& controller_poles,
                                                 const std::vector<cd>& observer_poles,
                                                 const SweepSettings& cfg) {
  if (!(cfg.magnitude >= 0.0)) throw ModelError("uncertainty_sweep: magnitude must be nonnegative");
  if (cfg.trials < 1) throw ModelError("uncertainty_sweep: trials must be at least 1");
  std::vector<SweepTrial> out(static_cast<std::size_t>(cfg.trials));
  const int n_threads = std::min(detail::sweep_threads(cfg.threads), cfg.trials);
  auto worker = [&](int start) {
    for (int i = start; i < cfg.trials; i += n_threads) {
      out[static_cast<std::size_t>(i)] = run_trial(truth, controller_poles, observer_poles, cfg, i);
    }
  };
  if (n_threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  return out;
}

inline double fraction_stable(const std::vector<SweepTrial>& trials) {
  if (trials.empty()) return 0.0;
  const auto n = std::count_if(trials.begin(), trials.end(), [](const SweepTrial& t) { return t.stable(); });
  return static_cast<double>(n) / static_cast<double>(trials.size());
}

}  // namespace specctrl

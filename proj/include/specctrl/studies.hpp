#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specctrl/plant_builders.hpp"
#include "specctrl/simulation.hpp"
#include "specctrl/spectral_model.hpp"
#include "specctrl/synthesis.hpp"

namespace specctrl::studies {

// Decay targets sit just inside the placed closed-loop abscissae (-0.5 for
// the toy and transport designs, -1 for reaction-diffusion), so that the
// shifted Lyapunov equations are solvable.
inline constexpr double kToyDelta = 0.45;
inline constexpr double kTransportDelta = 0.45;
inline constexpr double kDiffusionDelta = 0.9;
inline constexpr int kPdeOrder = 10;
inline constexpr Eigen::Index kToyTail = 200;
inline constexpr double kTEnd = 20.0;
inline constexpr double kDt = 1e-2;

inline std::vector<cd> toy_poles() { return {cd(-0.5, 1.0), cd(-0.5, -1.0)}; }

inline OdePdePlant transport_plant() {
  OdePdePlant p;
  p.A = RMat::Constant(1, 1, 1.0);
  p.B = RMat::Constant(1, 1, -2.0);
  p.C = RMat::Constant(1, 1, 1.0);
  p.Bu = RMat::Constant(1, 1, 1.0);
  p.Cy = RMat::Constant(1, 1, 1.0);
  p.kind = Transport{0.7};
  return p;
}

inline OdePdePlant diffusion_plant() {
  OdePdePlant p;
  p.A.resize(2, 2);
  p.A << 0.0, 1.0, -4.0, -4.0;
  p.B.resize(2, 1);
  p.B << 0.0, 3.0;
  p.C.resize(1, 2);
  p.C << 1.0, 0.0;
  p.Bu.resize(2, 1);
  p.Bu << 0.0, 1.0;
  p.Cy = p.C;
  p.kind = ReactionDiffusion{1.0, 1.0};
  return p;
}

/// Variant of the reaction-diffusion plant (nu = 1/9, B = [0; -1]) whose
/// rightmost modes lie close to the reference modal data. Used only as a
/// diagnostic next to the stated configuration.
inline OdePdePlant diffusion_plant_rescaled() {
  OdePdePlant p = diffusion_plant();
  p.B << 0.0, -1.0;
  p.kind = ReactionDiffusion{1.0 / 9.0, 1.0};
  return p;
}

inline SpectralModel pde_model(const OdePdePlant& plant, double delta, Eigen::Index extra_stable,
                               int order = kPdeOrder) {
  const ApproximatedPlant ap = approximate(plant, order);
  return to_spectral(ap.A, ap.B, ap.C, delta, extra_stable);
}

inline SpectralModel toy_model(Eigen::Index n1_dim, Eigen::Index n_tail = kToyTail) {
  return build_toy(n1_dim, n_tail, kToyDelta);
}

inline SpectralModel transport_model(Eigen::Index extra_stable = 0) {
  return pde_model(transport_plant(), kTransportDelta, extra_stable);
}

inline SpectralModel diffusion_model(Eigen::Index extra_stable,
                                     const OdePdePlant& plant = diffusion_plant()) {
  return pde_model(plant, kDiffusionDelta, extra_stable);
}

/// Poles used on the unstable block of the reaction-diffusion model.
inline std::vector<cd> diffusion_poles(Eigen::Index n0) {
  return std::vector<cd>(static_cast<std::size_t>(n0), cd(-1.0));
}

/// Exact-model design: gains, Lyapunov pair, certificate and controller.
struct Design {
  SpectralModel model;
  Gains gains;
  LyapunovPair lyapunov;
  std::optional<Certificate> certificate;
  std::string certificate_error;
  ControllerRealization controller;
  ClosedLoopSystem closed_loop;

  std::optional<LyapunovWeights> lyapunov_weights() const {
    if (!certificate) return std::nullopt;
    return LyapunovWeights::from(*certificate, lyapunov.P0, lyapunov.P1);
  }
};

inline Design design(const SpectralModel& model, const std::vector<cd>& controller_poles,
                     const std::vector<cd>& observer_poles) {
  Design d;
  d.model = model;
  d.gains = synthesize_gains(model, controller_poles, observer_poles);
  d.lyapunov = solve_lyapunov_pair(model, d.gains);
  try {
    d.certificate = certify_exact(model, d.gains, d.lyapunov.P0, d.lyapunov.P1);
  } catch (const Error& e) {
    d.certificate_error = e.what();
  }
  d.controller = assemble_controller(model, d.gains);
  d.closed_loop = assemble(model, d.gains);
  return d;
}

struct SimulationResult {
  Trajectory trajectory;
  DecayFit fit;
  double abscissa = 0.0;
};

inline SimulationResult simulate(ClosedLoopSystem sys, const std::optional<LyapunovWeights>& w,
                                 double t_end = kTEnd, double dt = kDt) {
  SimulationResult r;
  r.abscissa = closed_loop_abscissa(sys);
  r.trajectory = propagate(sys, default_initial_state(sys.layout), t_end, dt, w);
  r.fit = fit_decay(r.trajectory);
  return r;
}

inline SimulationResult simulate(const Design& d, double t_end = kTEnd, double dt = kDt) {
  return simulate(d.closed_loop, d.lyapunov_weights(), t_end, dt);
}

inline SimulationResult simulate_open_loop(const SpectralModel& m, double t_end = kTEnd,
                                           double dt = kDt) {
  return simulate(assemble(m, zero_gains(m)), std::nullopt, t_end, dt);
}

/// Largest relative increase of V between consecutive samples (zero or
/// negative when V is non-increasing).
inline double max_v_increase(const Trajectory& t) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < t.samples.size(); ++k) {
    const double prev = t.samples[k - 1].V;
    const double cur = t.samples[k].V;
    if (prev > 0.0) worst = std::max(worst, (cur - prev) / prev);
  }
  return worst;
}

/// Largest violation of the sandwich bounds on V, relative to the bound.
inline double max_sandwich_violation(const Trajectory& t, const LyapunovWeights& w) {
  const double p0min = w.P0.size() ? hermitian_min_eig(w.P0) : 0.0;
  const double p0max = w.P0.size() ? hermitian_max_eig(w.P0) : 0.0;
  const double p1min = w.P1.size() ? hermitian_min_eig(w.P1) : 0.0;
  const double p1max = w.P1.size() ? hermitian_max_eig(w.P1) : 0.0;
  double lo = 1.0;
  if (w.P0.size()) lo = std::min(lo, w.alpha * p0min);
  if (w.P1.size()) lo = std::min({lo, w.beta * p1min, w.gamma * p1min});
  const double hi = w.alpha * p0max + w.beta * p1max + w.gamma * p1max + 1.0;
  double worst = 0.0;
  for (const auto& s : t.samples) {
    const double sq = s.total_norm * s.total_norm;
    if (sq == 0.0) continue;
    worst = std::max(worst, (lo * sq - s.V) / (lo * sq));
    worst = std::max(worst, (s.V - hi * sq) / (hi * sq));
  }
  return worst;
}

}  // namespace specctrl::studies

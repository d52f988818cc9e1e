#include <random>

#include <gtest/gtest.h>

#include "specctrl/plant_builders.hpp"
#include "specctrl/studies.hpp"
#include "specctrl/synthesis.hpp"

namespace specctrl {
namespace {

const std::vector<cd> kToyPoles{cd(-0.5, 1.0), cd(-0.5, -1.0)};

/// Largest distance in a greedy nearest matching of two multisets.
double MatchError(const CVec& got, std::vector<cd> want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    auto best = want.begin();
    for (auto it = want.begin(); it != want.end(); ++it) {
      if (std::abs(*it - got(i)) < std::abs(*best - got(i))) best = it;
    }
    worst = std::max(worst, std::abs(*best - got(i)));
    want.erase(best);
  }
  return worst;
}

CMat RandomMatrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cd(n(rng), n(rng));
  }
  return m;
}

CMat Scalar(cd v) { return CMat::Constant(1, 1, v); }

TEST(PlacePolesTest, ToyController) {
  const SpectralModel m = build_toy(2, 1);
  const CMat k = place_poles(m.A0, m.B0, kToyPoles);
  EXPECT_LT(MatchError(eigenvalues(m.A0 + m.B0 * k), kToyPoles), 1e-8);
}

TEST(PlacePolesTest, ScalarIntegrator) {
  const CMat k = place_poles(Scalar(0.0), Scalar(1.0), {cd(-1.0)});
  EXPECT_NEAR(std::abs(k(0, 0) - cd(-1.0)), 0.0, 1e-14);
}

TEST(PlacePolesTest, ScalarUnstableMode) {
  const CMat k = place_poles(Scalar(0.2483), Scalar(0.0233), {cd(-1.0)});
  EXPECT_NEAR(k(0, 0).real(), (-1.0 - 0.2483) / 0.0233, 1e-10);
  EXPECT_NEAR(std::abs(0.2483 + 0.0233 * k(0, 0) + 1.0), 0.0, 1e-12);
}

TEST(PlacePolesTest, RandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> re(-3.0, -0.1);
  std::uniform_real_distribution<double> im(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 6;
    const CMat a = RandomMatrix(n, n, rng);
    const CMat b = RandomMatrix(n, 1, rng);
    std::vector<cd> poles;
    for (Eigen::Index i = 0; i < n; ++i) poles.emplace_back(re(rng), im(rng));
    const CMat k = place_poles(a, b, poles);
    EXPECT_LT(MatchError(eigenvalues(a + b * k), poles), 1e-8) << "trial " << trial;
    const CMat c = RandomMatrix(1, n, rng);
    const CMat g = place_observer(a, c, poles);
    EXPECT_LT(MatchError(eigenvalues(a + g * c), poles), 1e-8) << "trial " << trial;
  }
}

TEST(PlacePolesTest, UncontrollablePairThrows) {
  CMat a = CMat::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 2.0;
  CMat b(2, 1);
  b << cd(1.0), cd(0.0);
  try {
    place_poles(a, b, {cd(-1.0), cd(-2.0)});
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("Hautus rank 1"), std::string::npos);
  }
}

TEST(PlacePolesTest, WrongPoleCountThrows) {
  const SpectralModel m = build_toy(1, 1);
  EXPECT_THROW(place_poles(m.A0, m.B0, {cd(-1.0)}), ModelError);
}

TEST(PlacePolesTest, IllConditionedControllabilityWarns) {
  CMat a = CMat::Zero(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0 + 1e-6;
  a(2, 2) = 1.0 + 2e-6;
  const CMat b = CMat::Ones(3, 1);
  std::vector<std::string> warnings;
  place_poles(a, b, {cd(-1.0), cd(-2.0), cd(-3.0)}, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("condition number"), std::string::npos);
}

TEST(PlaceObserverTest, ToyObserver) {
  const SpectralModel m = build_toy(2, 1);
  const CMat g = place_observer(m.A0, m.C0, kToyPoles);
  EXPECT_LT(MatchError(eigenvalues(m.A0 + g * m.C0), kToyPoles), 1e-8);
}

TEST(PlaceObserverTest, Scalar) {
  const CMat g = place_observer(Scalar(0.7), Scalar(1.0), {cd(-2.0)});
  EXPECT_NEAR(std::abs(g(0, 0) - cd(-2.7)), 0.0, 1e-14);
  const CMat g2 = place_observer(Scalar(0.2483), Scalar(1.9172), {cd(-1.0)});
  EXPECT_NEAR(g2(0, 0).real(), (-1.0 - 0.2483) / 1.9172, 1e-12);
}

TEST(PlaceObserverTest, UnobservablePairThrows) {
  CMat a = CMat::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 2.0;
  CMat c(1, 2);
  c << cd(1.0), cd(0.0);
  EXPECT_THROW(place_observer(a, c, {cd(-1.0), cd(-2.0)}), ModelError);
}

TEST(LyapunovTest, ScaledIdentity) {
  const CMat p = solve_shifted_lyapunov(-CMat::Identity(2, 2), 0.0);
  EXPECT_LT((p - 0.5 * CMat::Identity(2, 2)).norm(), 1e-14);
}

TEST(LyapunovTest, DecoupledShift) {
  CMat f = CMat::Zero(2, 2);
  f(0, 0) = -2.0;
  f(1, 1) = -3.0;
  const CMat p = solve_shifted_lyapunov(f, 1.0);
  EXPECT_NEAR(p(0, 0).real(), 0.5, 1e-14);
  EXPECT_NEAR(p(1, 1).real(), 0.25, 1e-14);
  EXPECT_NEAR(std::abs(p(0, 1)), 0.0, 1e-14);
}

TEST(LyapunovTest, ToyObserverBasedLoop) {
  const SpectralModel m = build_toy(2, 1, 0.45);
  const Gains g = synthesize_gains(m, kToyPoles, kToyPoles);
  const CMat f0 = assemble_F0(m, g);
  const CMat p = solve_shifted_lyapunov(f0, m.delta);
  EXPECT_LE(lyapunov_residual(p, f0, m.delta), 1e-10);
}

TEST(LyapunovTest, RandomShiftedMatrices) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> margin(0.1, 1.0);
  std::uniform_real_distribution<double> shift(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 10;
    CMat f = RandomMatrix(n, n, rng) * 0.5;
    const double delta = shift(rng);
    const double abscissa = spectral_abscissa(f);
    f -= (abscissa + delta + margin(rng)) * CMat::Identity(n, n);
    const CMat p = solve_shifted_lyapunov(f, delta);
    EXPECT_LE(lyapunov_residual(p, f, delta), 1e-10) << trial;
    EXPECT_LE((p - p.adjoint()).norm(), 1e-12) << trial;
    EXPECT_GT(hermitian_min_eig(p), 0.0) << trial;
    const CMat lhs = p * f + f.adjoint() * p + 2.0 * delta * p;
    EXPECT_LT(hermitian_max_eig(lhs), 0.0) << trial;
  }
}

TEST(LyapunovTest, NonHurwitzShiftThrows) {
  CMat f = CMat::Zero(2, 2);
  f(0, 0) = -0.5;
  f(1, 1) = -3.0;
  try {
    solve_shifted_lyapunov(f, 0.5);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("not Hurwitz"), std::string::npos);
  }
}

struct ToyDesign {
  SpectralModel model;
  Gains gains;
  LyapunovPair lp;
};

ToyDesign MakeToy(Eigen::Index n1, Eigen::Index n_tail = 200) {
  ToyDesign d;
  d.model = build_toy(n1, n_tail, 0.45);
  d.gains = synthesize_gains(d.model, kToyPoles, kToyPoles);
  d.lp = solve_lyapunov_pair(d.model, d.gains);
  return d;
}

TEST(WeightsTest, ToyWeightsArePositive) {
  const ToyDesign d = MakeToy(2);
  const TailSums s = tail_sums(d.model, d.gains, d.lp.P0);
  const Weights w = weights(d.model, d.gains, d.lp.P0, d.lp.P1, s, d.model.B1);
  EXPECT_GT(w.alpha, 0.0);
  EXPECT_GT(w.beta, 0.0);
  EXPECT_GT(w.gamma, 0.0);
  EXPECT_TRUE(std::isfinite(w.alpha) && std::isfinite(w.beta) && std::isfinite(w.gamma));
}

TEST(WeightsTest, ClosedForm) {
  const ToyDesign d = MakeToy(3, 20);
  const TailSums s = tail_sums(d.model, d.gains, d.lp.P0);
  const Weights w = weights(d.model, d.gains, d.lp.P0, d.lp.P1, s, d.model.B1);
  const double delta = 0.45;
  const double a1 = 9.0;
  const double p0min = hermitian_min_eig(d.lp.P0);
  EXPECT_NEAR(w.alpha, 4.0 / delta * s.S_b / (p0min * (a1 - delta)), 1e-12 * w.alpha);
  // Tail sums with unit b_i and c_i
  EXPECT_NEAR(s.S_b, 20.0 * d.gains.K0.squaredNorm(), 1e-9 * s.S_b);
}

TEST(WeightsTest, DoublingP1HalvesBetaKeepsRatio) {
  const ToyDesign d = MakeToy(2);
  const TailSums s = tail_sums(d.model, d.gains, d.lp.P0);
  const Weights w1 = weights(d.model, d.gains, d.lp.P0, d.lp.P1, s, d.model.B1);
  const Weights w2 = weights(d.model, d.gains, d.lp.P0, 2.0 * d.lp.P1, s, d.model.B1);
  EXPECT_NEAR(w2.beta, 0.5 * w1.beta, 1e-12 * w1.beta);
  EXPECT_NEAR(w2.gamma / w2.beta, w1.gamma / w1.beta, 1e-9 * (w1.gamma / w1.beta));
}

TEST(WeightsTest, ZeroTailInputUsesFloor) {
  ToyDesign d = MakeToy(2, 5);
  for (auto& t : d.model.tail) t.b.setZero();
  const TailSums s = tail_sums(d.model, d.gains, d.lp.P0);
  EXPECT_EQ(s.S_b, 0.0);
  const Weights w = weights(d.model, d.gains, d.lp.P0, d.lp.P1, s, d.model.B1);
  EXPECT_GT(w.alpha, 0.0);
  EXPECT_LT(w.alpha, 1e-9);
}

TEST(WeightsTest, SlowStableBlockThrows) {
  ToyDesign d = MakeToy(2, 5);
  SpectralModel slow = d.model;
  slow.A1(1, 1) = -0.4;  // sigma_min(A1) = -1 still; make the floor slow
  slow.A1(0, 0) = -0.3;
  slow.A1(1, 1) = -0.2;
  const TailSums s = tail_sums(slow, d.gains, d.lp.P0);
  EXPECT_THROW(weights(slow, d.gains, d.lp.P0, d.lp.P1, s, slow.B1), ModelError);
}

TEST(WeightsTest, ZeroStableInputThrows) {
  ToyDesign d = MakeToy(2, 5);
  d.model.B1.setZero();
  const TailSums s = tail_sums(d.model, d.gains, d.lp.P0);
  EXPECT_THROW(weights(d.model, d.gains, d.lp.P0, d.lp.P1, s, d.model.B1), ModelError);
}

TEST(CertifyExactTest, OrderOneFails) {
  const ToyDesign d = MakeToy(1);
  const Certificate c = certify_exact(d.model, d.gains, d.lp.P0, d.lp.P1);
  EXPECT_FALSE(c.satisfied);
  EXPECT_EQ(c.eta, 0.0);
  EXPECT_EQ(c.certified_rate, 0.45);
  EXPECT_TRUE(c.tail_inconclusive);
}

TEST(CertifyExactTest, RhoAboveTruncatedTailBound) {
  for (Eigen::Index n1 : {2, 3, 4}) {
    const ToyDesign d = MakeToy(n1);
    const Certificate c = certify_exact(d.model, d.gains, d.lp.P0, d.lp.P1);
    const double a1 = static_cast<double>(n1 * n1);
    const double g2 = d.gains.G0.squaredNorm() * 2.0;
    const double bound = 16.0 * 200.0 * 200.0 * d.gains.K0.squaredNorm() * g2 /
                         (0.45 * 0.45 * (a1 - 0.45) * a1);
    EXPECT_GE(c.rho, bound * (1.0 - 1e-9)) << n1;
    EXPECT_EQ(c.satisfied, c.rho <= 1.0 && c.eta < c.delta);
  }
}

TEST(CertifyExactTest, ZeroOutputTailSatisfies) {
  ToyDesign d = MakeToy(2, 10);
  for (auto& t : d.model.tail) t.c.setZero();
  const Certificate c = certify_exact(d.model, d.gains, d.lp.P0, d.lp.P1);
  EXPECT_EQ(c.rho, 0.0);
  EXPECT_TRUE(c.satisfied);
}

TEST(CertifyExactTest, SummableTailWithBoundsIsConclusive) {
  ToyDesign d = MakeToy(2, 400);
  for (std::size_t i = 0; i < d.model.tail.size(); ++i) {
    const double k = static_cast<double>(i + 3);
    d.model.tail[i].b(0) = 1.0 / (k * k * k * k * k * k * k);
    d.model.tail[i].c(0) = 1.0 / (k * k * k * k * k * k * k);
  }
  d.model.tail_b_sum_bound = 1e-30;
  d.model.tail_c_sum_bound = 1e-30;
  const Certificate c = certify_exact(d.model, d.gains, d.lp.P0, d.lp.P1);
  EXPECT_FALSE(c.tail_inconclusive);
  EXPECT_LT(c.rho, 1.0);
  EXPECT_TRUE(c.satisfied);
}

TEST(CertifyExactTest, RejectsInvalidLyapunovPair) {
  const ToyDesign d = MakeToy(2, 5);
  EXPECT_THROW(certify_exact(d.model, d.gains, -d.lp.P0, d.lp.P1), ModelError);
}

TEST(CertifyExactTest, DecisionInvariantUnderUniformRescaling) {
  const ToyDesign base = MakeToy(2, 50);
  const bool reference = certify_exact(base.model, base.gains, base.lp.P0, base.lp.P1).satisfied;
  for (double s : {0.5, 2.0}) {
    SpectralModel m = base.model;
    m.B0 /= s;
    m.B1 /= s;
    m.C0 *= s;
    m.C1 *= s;
    for (auto& t : m.tail) {
      t.b /= s;
      t.c *= s;
    }
    const Gains g = synthesize_gains(m, kToyPoles, kToyPoles);
    const LyapunovPair lp = solve_lyapunov_pair(m, g);
    EXPECT_EQ(certify_exact(m, g, lp.P0, lp.P1).satisfied, reference) << s;
  }
}

TEST(CertifyExactTest, NoUnstableBlock) {
  const SpectralModel m = studies::diffusion_model(2);
  ASSERT_EQ(m.n0(), 0);
  const Gains g = synthesize_gains(m, {}, {});
  const LyapunovPair lp = solve_lyapunov_pair(m, g);
  const Certificate c = certify_exact(m, g, lp.P0, lp.P1);
  EXPECT_EQ(c.alpha, 0.0);
  EXPECT_EQ(c.beta, 1.0);
  EXPECT_EQ(c.gamma, 1.0);
  EXPECT_EQ(c.rho, 0.0);
  EXPECT_TRUE(c.satisfied);
}

TEST(CertifyUncertainTest, ZeroUncertaintyMatchesExact) {
  const ToyDesign d = MakeToy(3, 30);
  const Certificate a = certify_exact(d.model, d.gains, d.lp.P0, d.lp.P1);
  const Certificate b = certify_uncertain(d.model, UncertaintySpec::zero_like(d.model), d.gains,
                                          d.lp.P0, d.lp.P1);
  EXPECT_EQ(b.eta, 0.0);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_EQ(a.rho, b.rho);
  EXPECT_EQ(a.S_b, b.S_b);
  EXPECT_EQ(a.S_c, b.S_c);
  EXPECT_EQ(a.certified_rate, b.certified_rate);
  EXPECT_EQ(a.satisfied, b.satisfied);
}

TEST(CertifyUncertainTest, EtaIsMonotoneInPerturbationSize) {
  const ToyDesign d = MakeToy(4, 20);
  std::mt19937_64 rng(5);
  for (int draw = 0; draw < 20; ++draw) {
    const SpectralModel& m = d.model;
    const UncertaintySpec u{RandomMatrix(2, 2, rng), RandomMatrix(4, 4, rng), RandomMatrix(2, 1, rng),
                            RandomMatrix(4, 1, rng), RandomMatrix(1, 2, rng), RandomMatrix(1, 4, rng)};
    const TailSums s = tail_sums(m, d.gains, d.lp.P0);
    const Weights w = weights(m, d.gains, d.lp.P0, d.lp.P1, s, m.B1);
    double prev = 0.0;
    for (int k = 1; k <= 10; ++k) {
      const double t = 0.1 * k;
      const EtaComponents e = eta_components(d.gains, u.scaled(t), d.lp.P0, d.lp.P1, w);
      EXPECT_GE(e.max(), prev) << "draw " << draw << " t " << t;
      prev = e.max();
    }
    const Certificate c = certify_uncertain(m, u.scaled(0.01), d.gains, d.lp.P0, d.lp.P1);
    EXPECT_NEAR(c.certified_rate, c.delta - c.eta, 1e-15);
  }
}

TEST(CertifyUncertainTest, DimensionMismatchThrows) {
  const ToyDesign d = MakeToy(2, 5);
  UncertaintySpec u = UncertaintySpec::zero_like(d.model);
  u.dA1 = CMat::Zero(3, 3);
  EXPECT_THROW(certify_uncertain(d.model, u, d.gains, d.lp.P0, d.lp.P1), ModelError);
}

TEST(AssembleControllerTest, EmptyStableBlock) {
  const SpectralModel m = studies::transport_model(0);
  const Gains g = synthesize_gains(m, kToyPoles, kToyPoles);
  const ControllerRealization c = assemble_controller(m, g);
  EXPECT_TRUE(c.L.isApprox(m.A0 + g.G0 * m.C0));
  EXPECT_TRUE(c.M.isApprox(-g.G0));
  EXPECT_TRUE(c.Nmat.isApprox(m.B0));
  EXPECT_TRUE(c.K.isApprox(g.K0));
}

TEST(AssembleControllerTest, BlockTriangularSpectrum) {
  const ToyDesign d = MakeToy(2, 5);
  const ControllerRealization c = assemble_controller(d.model, d.gains);
  ASSERT_EQ(c.L.rows(), 4);
  EXPECT_LT(MatchError(eigenvalues(c.L), {cd(-0.5, 1), cd(-0.5, -1), cd(-1), cd(-4)}), 1e-8);
}

TEST(AssembleControllerTest, KnowledgeModelBlocks) {
  const SpectralModel m = studies::diffusion_model(2, studies::diffusion_plant_rescaled());
  ASSERT_EQ(m.n0(), 1);
  const Gains g = synthesize_gains(m, {cd(-1.0)}, {cd(-1.0)});
  const ControllerRealization c = assemble_controller(m, g);
  const CVec ev = eigenvalues(c.L);
  EXPECT_LT(MatchError(ev, {cd(-1.0), m.A1(0, 0), m.A1(1, 1)}), 1e-8);
}

TEST(AssembleControllerTest, GainDimensionMismatchThrows) {
  const ToyDesign d = MakeToy(2, 5);
  Gains g = d.gains;
  g.K0 = CMat::Ones(1, 3);
  EXPECT_THROW(assemble_controller(d.model, g), ModelError);
}

TEST(RealifyTest, RealControllerUnchanged) {
  const ToyDesign d = MakeToy(2, 5);
  const ControllerRealization c = assemble_controller(d.model, d.gains);
  const ControllerRealization r = realify(c);
  EXPECT_EQ(r.representation, Representation::RealifiedBlockDiagonal);
  EXPECT_LT((r.L - c.L).norm(), 1e-12);
  EXPECT_LT((r.K - c.K).norm(), 1e-12);
}

TEST(RealifyTest, CanonicalPair) {
  ControllerRealization c;
  c.L = CMat::Zero(2, 2);
  c.L(0, 0) = cd(-1.0, 3.0);
  c.L(1, 1) = cd(-1.0, -3.0);
  c.M = CMat::Zero(2, 1);
  c.M << cd(1.0, 2.0), cd(1.0, -2.0);
  c.Nmat = c.M;
  c.K = CMat::Zero(1, 2);
  c.K << cd(0.5, -1.0), cd(0.5, 1.0);
  c.partner = {1, 0};
  const ControllerRealization r = realify(c);
  EXPECT_NEAR(r.L(0, 0).real(), -1.0, 1e-14);
  EXPECT_NEAR(r.L(0, 1).real(), 3.0, 1e-14);
  EXPECT_NEAR(r.L(1, 0).real(), -3.0, 1e-14);
  EXPECT_NEAR(r.L(1, 1).real(), -1.0, 1e-14);
}

TEST(RealifyTest, TransportControllerTransferPreserved) {
  const SpectralModel m = studies::transport_model(0);
  const Gains g = synthesize_gains(m, kToyPoles, kToyPoles);
  const ControllerRealization c = assemble_controller(m, g);
  const ControllerRealization r = realify(c);
  EXPECT_TRUE(is_real(r.L, 0.0) && is_real(r.M, 0.0) && is_real(r.Nmat, 0.0) && is_real(r.K, 0.0));
  EXPECT_LT(MatchError(eigenvalues(r.L), kToyPoles), 1e-8);
  EXPECT_LT(std::abs(controller_transfer(c, cd(1.0))(0, 0) - controller_transfer(r, cd(1.0))(0, 0)), 1e-10);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> w(-10.0, 10.0);
  for (int k = 0; k < 10; ++k) {
    const cd s(0.0, w(rng));
    const cd a = controller_transfer(c, s)(0, 0);
    const cd b = controller_transfer(r, s)(0, 0);
    EXPECT_LT(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a))) << s;
  }
}

TEST(RealifyTest, DiffusionControllerWithComplexStableBlock) {
  const SpectralModel m = studies::diffusion_model(2, studies::diffusion_plant_rescaled());
  const Gains g = synthesize_gains(m, {cd(-1.0)}, {cd(-1.0)});
  const ControllerRealization c = assemble_controller(m, g);
  const ControllerRealization r = realify(c);
  for (double w : {0.0, 0.7, 3.0}) {
    const cd s(0.1, w);
    EXPECT_LT(std::abs(controller_transfer(c, s)(0, 0) - controller_transfer(r, s)(0, 0)), 1e-10);
  }
}

TEST(RealifyTest, UnpairedModeThrows) {
  ControllerRealization c;
  c.L = CMat::Zero(2, 2);
  c.L(0, 0) = cd(-1.0, 3.0);
  c.L(1, 1) = cd(-2.0, 0.0);
  c.M = CMat::Ones(2, 1);
  c.Nmat = c.M;
  c.K = CMat::Ones(1, 2);
  c.partner = {0, 1};
  try {
    realify(c);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("unpaired complex mode"), std::string::npos);
  }
}

}  // namespace
}  // namespace specctrl

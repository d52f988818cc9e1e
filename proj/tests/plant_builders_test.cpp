#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "specctrl/plant_builders.hpp"
#include "specctrl/studies.hpp"
#include "specctrl/synthesis.hpp"

namespace specctrl {
namespace {

constexpr double kPi = std::numbers::pi;

double NearestDistance(const std::vector<cd>& values, cd target) {
  double best = std::numeric_limits<double>::infinity();
  for (const cd& v : values) best = std::min(best, std::abs(v - target));
  return best;
}

TEST(BuildToyTest, StableBlockAndFirstTailMode) {
  const SpectralModel m = build_toy(2, 3);
  ASSERT_EQ(m.n1_dim(), 2);
  EXPECT_EQ(m.A1(0, 0), cd(-1.0));
  EXPECT_EQ(m.A1(1, 1), cd(-4.0));
  EXPECT_EQ(m.tail[0].a, cd(-9.0));
  EXPECT_EQ(m.tail[2].a, cd(-25.0));
}

TEST(BuildToyTest, FourStableModes) {
  const SpectralModel m = build_toy(4, 1);
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(m.A1(k - 1, k - 1), cd(-k * k));
}

TEST(BuildToyTest, SingleTailMode) {
  const SpectralModel m = build_toy(1, 1);
  ASSERT_EQ(m.tail.size(), 1u);
  EXPECT_EQ(m.tail[0].a, cd(-4.0));
  EXPECT_EQ(m.tail[0].b(0), cd(1.0));
  EXPECT_EQ(m.tail[0].c(0), cd(1.0));
  EXPECT_EQ(m.B0, CMat::Ones(2, 1));
  EXPECT_EQ(m.C0, CMat::Ones(1, 2));
}

TEST(PadeTest, FirstOrderIsTextbook) {
  const RationalApprox r = pade_exp(1, 1.0);
  for (cd s : {cd(0.3, 0.0), cd(-0.2, 1.7), cd(2.0, -3.0)}) {
    const cd expected = (1.0 - s / 2.0) / (1.0 + s / 2.0);
    EXPECT_NEAR(std::abs(r.evaluate(s) - expected), 0.0, 1e-14);
  }
}

TEST(PadeTest, UnitDcGain) {
  for (int n = 1; n <= kMaxPadeOrder; ++n) {
    EXPECT_NEAR(std::abs(pade_exp(n, 0.7).evaluate(cd(0.0)) - 1.0), 0.0, 1e-9) << "N=" << n;
  }
}

TEST(PadeTest, AccurateInsideValidityRadius) {
  for (double h : {0.7, 1.0, 2.5}) {
    for (int n = 1; n <= 12; ++n) {
      const RationalApprox r = pade_exp(n, h);
      const double w_max = pade_validity_radius(n, h);
      for (double frac : {0.1, 0.5, 1.0}) {
        const double w = frac * w_max;
        const double err = std::abs(r.evaluate(cd(0.0, w)) - std::exp(cd(0.0, -h * w)));
        EXPECT_LE(err, 1e-6) << "N=" << n << " h=" << h << " w=" << w;
      }
    }
  }
}

TEST(PadeTest, ErrorDecreasesWithOrder) {
  const double h = 0.7;
  for (double wh : {0.5, 1.0, 2.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {4, 6, 8, 10}) {
      const double w = wh / h;
      const double err = std::abs(pade_exp(n, h).evaluate(cd(0.0, w)) - std::exp(cd(0.0, -h * w)));
      EXPECT_LE(err, std::max(prev, 1e-14)) << "N=" << n << " w*h=" << wh;
      prev = err;
    }
  }
}

TEST(PadeTest, RealizationIsMinimal) {
  for (int n : {1, 4, 10}) {
    const RationalApprox r = pade_exp(n, 0.7);
    const RVec d = balancing_scale(r.A);
    const RMat a = d.cwiseInverse().asDiagonal() * r.A * d.asDiagonal();
    const ModalDecomposition md = modal_decomposition(a);
    const CVec b = md.inverse * (d.cwiseInverse().asDiagonal() * r.B).cast<cd>();
    const CRow c = (r.C * d.asDiagonal()).cast<cd>() * md.vectors;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      EXPECT_GT(std::abs(b(i)), 1e-8 * b.norm()) << "N=" << n << " mode " << i;
      EXPECT_GT(std::abs(c(i)), 1e-8 * c.norm()) << "N=" << n << " mode " << i;
    }
  }
}

TEST(PadeTest, RejectsUnsupportedOrder) {
  EXPECT_THROW(pade_exp(0, 1.0), ModelError);
  EXPECT_THROW(pade_exp(21, 1.0), ModelError);
  EXPECT_THROW(pade_exp(3, -1.0), ModelError);
}

cd DiffusionTransfer(cd s, double nu, double lambda) {
  const cd mu = std::sqrt((s - lambda) / nu);
  return mu / std::sinh(mu);
}

TEST(RationalDiffusionTest, UnitValueAtLambda) {
  for (int n : {1, 3, 10, 50}) {
    EXPECT_NEAR(std::abs(rational_diffusion(n, 1.0, 1.0).evaluate(cd(1.0)) - 1.0), 0.0, 1e-12) << n;
    EXPECT_NEAR(std::abs(rational_diffusion(n, 0.3, -2.0).evaluate(cd(-2.0)) - 1.0), 0.0, 1e-12) << n;
  }
}

TEST(RationalDiffusionTest, PolesAtDirichletSpectrum) {
  const RationalApprox r = rational_diffusion(10, 1.0, 1.0);
  for (int k = 1; k <= 10; ++k) EXPECT_NEAR(r.A(k - 1, k - 1), 1.0 - k * k * kPi * kPi, 1e-12);
}

TEST(RationalDiffusionTest, MatchesTransferFunction) {
  const RationalApprox r = rational_diffusion(10, 1.0, 1.0);
  for (cd s : {cd(0.0), cd(-1.5, 2.0), cd(3.0, -1.0), cd(-10.0, 0.5)}) {
    EXPECT_LT(std::abs(r.evaluate(s) - DiffusionTransfer(s, 1.0, 1.0)), 1e-4) << s;
  }
}

TEST(RationalDiffusionTest, RealizationIsMinimal) {
  const RationalApprox r = rational_diffusion(10, 1.0, 1.0);
  EXPECT_TRUE(is_controllable(r.A.cast<cd>(), r.B.cast<cd>()));
  EXPECT_TRUE(is_observable(r.A.cast<cd>(), r.C.cast<cd>()));
}

TEST(RationalDiffusionTest, PolesMatchRootFinding) {
  OdePdePlant p = studies::diffusion_plant();
  p.B.setZero();
  p.C.setZero();
  const auto fd = oracle_eigs(p, 400, 6).eigenvalues;
  const RationalApprox r = rational_diffusion(10, 1.0, 1.0);
  for (int k = 1; k <= 2; ++k) {
    EXPECT_LT(NearestDistance(fd, cd(r.A(k - 1, k - 1))), 1e-3) << k;
  }
}

TEST(InterconnectTest, DecoupledIsBlockDiagonal) {
  OdePdePlant p = studies::diffusion_plant();
  RationalApprox r = rational_diffusion(3, 1.0, 1.0);
  r.B.setZero();
  r.C.setZero();
  r.D = 0.0;
  const ApproximatedPlant ap = interconnect(p, r);
  EXPECT_EQ(ap.A.rows(), 5);
  EXPECT_TRUE(ap.A.topLeftCorner(2, 2).isApprox(p.A));
  EXPECT_TRUE(ap.A.bottomRightCorner(3, 3).isApprox(r.A));
  EXPECT_EQ(ap.A.topRightCorner(2, 3).norm(), 0.0);
  EXPECT_EQ(ap.A.bottomLeftCorner(3, 2).norm(), 0.0);
  EXPECT_TRUE(ap.B.topRows(2).isApprox(p.Bu));
  EXPECT_TRUE(ap.C.leftCols(2).isApprox(p.Cy));
}

TEST(InterconnectTest, RejectsMismatchedApproximation) {
  RationalApprox r = pade_exp(3, 0.7);
  r.C = RMat::Ones(1, 2);
  EXPECT_THROW(interconnect(studies::transport_plant(), r), ModelError);
  OdePdePlant bad = studies::transport_plant();
  bad.B = RMat::Ones(2, 1);
  EXPECT_THROW(interconnect(bad, pade_exp(3, 0.7)), ModelError);
}

TEST(TransportTest, RightmostModes) {
  const SpectralModel m = studies::transport_model(0);
  ASSERT_EQ(m.n0(), 2);
  const std::vector<cd> a0{m.A0(0, 0), m.A0(1, 1)};
  EXPECT_LT(NearestDistance(a0, cd(0.1863, 1.5555)), 1e-3);
  EXPECT_LT(NearestDistance(a0, cd(0.1863, -1.5555)), 1e-3);
  EXPECT_EQ(m.n1_dim(), 0);
  EXPECT_EQ(m.n_tail(), 9);
}

TEST(TransportTest, RouteAgreement) {
  const auto oracle = oracle_eigs(studies::transport_plant(), 200, 4);
  ASSERT_GE(oracle.eigenvalues.size(), 4u);
  const auto rational = model_eigenvalues(studies::transport_model(0));
  for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(rational[k] - oracle.eigenvalues[k]), 1e-3) << k;
}

TEST(ReactionDiffusionTest, RouteAgreement) {
  const auto oracle = oracle_eigs(studies::diffusion_plant(), 400, 4);
  ASSERT_EQ(oracle.eigenvalues.size(), 4u);
  const auto rational = model_eigenvalues(studies::diffusion_model(2));
  for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(rational[k] - oracle.eigenvalues[k]), 1e-3) << k;
}

TEST(ReactionDiffusionTest, DecoupledFiniteDifferenceSpectrum) {
  OdePdePlant p = studies::diffusion_plant();
  p.B.setZero();
  p.C.setZero();
  const auto fd = oracle_eigs(p, 400, 8).eigenvalues;
  EXPECT_LT(NearestDistance(fd, cd(1.0 - kPi * kPi)), 1e-3);
  EXPECT_LT(NearestDistance(fd, cd(1.0 - 4.0 * kPi * kPi)), 1e-3);
  EXPECT_LT(NearestDistance(fd, cd(-2.0)), 1e-6);
}

TEST(OracleTest, RejectsCoarseResolution) {
  EXPECT_THROW(oracle_eigs(studies::diffusion_plant(), 10, 3), ModelError);
}

TEST(ToSpectralTest, EigenvectorResiduals) {
  const ApproximatedPlant ap = approximate(studies::transport_plant(), 10);
  const ModalDecomposition md = modal_decomposition(ap.A);
  const CMat a = ap.A.cast<cd>();
  for (Eigen::Index k = 0; k < md.values.size(); ++k) {
    const CVec v = md.vectors.col(k);
    EXPECT_LT((a * v - md.values(k) * v).norm() / v.norm(), 1e-8) << k;
  }
  EXPECT_LT((md.inverse * md.vectors - CMat::Identity(11, 11)).norm(), 1e-8);
}

TEST(ToSpectralTest, ConjugatePairsAreAdjacent) {
  for (const SpectralModel& m : {studies::transport_model(0), studies::diffusion_model(2)}) {
    const auto ev = model_eigenvalues(m);
    for (std::size_t k = 0; k < ev.size(); ++k) {
      if (ev[k].imag() > 0.0) {
        ASSERT_LT(k + 1, ev.size());
        EXPECT_LT(std::abs(ev[k + 1] - std::conj(ev[k])), 1e-10);
      }
    }
  }
}

TEST(ToSpectralTest, ConjugateSymmetricModalData) {
  const SpectralModel m = studies::transport_model(0);
  EXPECT_LT(std::abs(m.B0(1, 0) - std::conj(m.B0(0, 0))), 1e-10);
  EXPECT_LT(std::abs(m.C0(0, 1) - std::conj(m.C0(0, 0))), 1e-10);
}

TEST(ToSpectralTest, ProductsMatchReferenceModalData) {
  const SpectralModel m = studies::transport_model(0);
  const cd expected = cd(0.1239, 0.3596) * cd(2.2437, -0.1003);
  const std::vector<cd> prods{m.B0(0, 0) * m.C0(0, 0), m.B0(1, 0) * m.C0(0, 1)};
  EXPECT_LT(NearestDistance(prods, expected), 1e-3);
  EXPECT_LT(NearestDistance(prods, std::conj(expected)), 1e-3);
}

TEST(ToSpectralTest, ZeroInputMap) {
  const ApproximatedPlant ap = approximate(studies::transport_plant(), 6);
  const SpectralModel m = to_spectral(ap.A, RMat::Zero(7, 1), ap.C, 0.45, 1);
  EXPECT_EQ(m.B0.norm(), 0.0);
  EXPECT_EQ(m.B1.norm(), 0.0);
  for (const auto& t : m.tail) EXPECT_EQ(t.b.norm(), 0.0);
}

TEST(ToSpectralTest, ProducesValidModels) {
  EXPECT_TRUE(validate(studies::transport_model(0)).empty());
  EXPECT_TRUE(validate(studies::transport_model(2)).empty());
  EXPECT_TRUE(validate(studies::diffusion_model(0)).empty());
  EXPECT_TRUE(validate(studies::diffusion_model(2)).empty());
}

TEST(ToSpectralTest, NeverSplitsConjugatePair) {
  // Transport tail starts with a pair; asking for one stable mode keeps both.
  const SpectralModel m = studies::transport_model(1);
  EXPECT_EQ(m.n1_dim(), 2);
}

TEST(ToSpectralTest, TooManyModesThrows) {
  const ApproximatedPlant ap = approximate(studies::transport_plant(), 4);
  EXPECT_THROW(to_spectral(ap.A, ap.B, ap.C, 0.45, 0, 10), ModelError);
}

TEST(ToSpectralTest, DefectiveMatrixThrows) {
  RMat a(3, 3);
  a << -1, 1, 0, 0, -1, 0, 0, 0, 2;
  EXPECT_THROW(to_spectral(a, RMat::Ones(3, 1), RMat::Ones(1, 3), 0.5, 0), NumericalError);
}

TEST(EigvecTransportTest, ScalarPlant) {
  const OdePdePlant p = studies::transport_plant();
  const EigenvectorSample v = eigvec_transport(cd(0.3, 1.0), p, 11);
  ASSERT_EQ(v.ode.size(), 1);
  EXPECT_EQ(v.ode(0), cd(-2.0));
  EXPECT_EQ(v.pde(10), cd(-2.0));  // theta = 1 gives C adj(sI - A) B
  EXPECT_EQ(v.theta(0), 0.0);
}

TEST(EigvecTransportTest, CharacteristicResidual) {
  const OdePdePlant p = studies::transport_plant();
  const cd s = oracle_eigs(p, 100, 1).eigenvalues.at(0);
  const EigenvectorSample v = eigvec_transport(s, p, 21);
  // x' = A x + B z(0) at the eigenvalue
  const CVec r = (s * CMat::Identity(1, 1) - p.A.cast<cd>()) * v.ode - p.B.cast<cd>() * v.pde(0);
  EXPECT_LT(r.norm() / v.ode.norm(), 1e-6);
}

TEST(EigvecDiffusionTest, DirichletEnd) {
  const EigenvectorSample v = eigvec_diffusion(cd(-1.0, 2.0), studies::diffusion_plant(), 11);
  EXPECT_EQ(std::abs(v.pde(10)), 0.0);
}

TEST(EigvecDiffusionTest, BranchChoiceOnlyFlipsSign) {
  const OdePdePlant p = studies::diffusion_plant();
  for (cd s : {cd(-1.55, 2.1), cd(0.3, 0.0), cd(-20.0, -4.0)}) {
    const auto a = eigvec_diffusion(s, p, 15, false);
    const auto b = eigvec_diffusion(s, p, 15, true);
    EXPECT_LT((a.ode + b.ode).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.pde + b.pde).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EigvecDiffusionTest, FirstDirichletModeShape) {
  const OdePdePlant p = studies::diffusion_plant();
  const cd s(1.0 - kPi * kPi);
  const auto v = eigvec_diffusion(s, p, 21);
  const cd cab = [&] {
    const CMat m = s * CMat::Identity(2, 2) - p.A.cast<cd>();
    return (p.C.cast<cd>() * adjugate(m) * p.B.cast<cd>())(0);
  }();
  for (Eigen::Index k = 0; k < 21; ++k) {
    const cd expected = cab * cd(0.0, std::sin(kPi * (1.0 - v.theta(k))));
    EXPECT_LT(std::abs(v.pde(k) - expected), 1e-10) << k;
  }
}

TEST(EigvecDiffusionTest, CharacteristicResidual) {
  const OdePdePlant p = studies::diffusion_plant();
  auto charfn = [&](cd s) {
    const CMat m = s * CMat::Identity(2, 2) - p.A.cast<cd>();
    const cd mu = std::sqrt(s - 1.0);
    return m.determinant() + mu / std::sinh(mu) * (p.C.cast<cd>() * adjugate(m) * p.B.cast<cd>())(0);
  };
  // Secant refinement of the rational-route eigenvalue on the exact
  // characteristic function.
  cd s0 = studies::diffusion_model(2).A1(0, 0);
  cd s1 = s0 + 1e-4;
  for (int it = 0; it < 50 && std::abs(s1 - s0) > 1e-14; ++it) {
    const cd f0 = charfn(s0);
    const cd f1 = charfn(s1);
    const cd s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
    s0 = s1;
    s1 = s2;
  }
  EXPECT_LT(std::abs(s1 - studies::diffusion_model(2).A1(0, 0)), 1e-4);
  const auto v = eigvec_diffusion(s1, p, 101);
  // x' = A x + B z_theta(1), z_theta(1) = -mu C adj B
  const cd mu = std::sqrt(s1 - 1.0);
  const cd flux = -mu * (p.C.cast<cd>() * adjugate(s1 * CMat::Identity(2, 2) - p.A.cast<cd>()) *
                         p.B.cast<cd>())(0);
  const CVec r = (s1 * CMat::Identity(2, 2) - p.A.cast<cd>()) * v.ode - p.B.cast<cd>() * flux;
  EXPECT_LT(r.norm() / v.ode.norm(), 1e-6);
}

TEST(AdjugateTest, MatchesInverseTimesDeterminant) {
  CMat m(3, 3);
  m << cd(1, 2), cd(0, 1), cd(3), cd(-1), cd(2, -1), cd(0.5), cd(0.2), cd(1), cd(-3, 1);
  EXPECT_LT((adjugate(m) - m.determinant() * m.inverse()).norm(), 1e-12);
  CMat singular = CMat::Ones(2, 2);
  CMat expected(2, 2);
  expected << cd(1), cd(-1), cd(-1), cd(1);
  EXPECT_LT((adjugate(singular) - expected).norm(), 1e-15);
}

}  // namespace
}  // namespace specctrl

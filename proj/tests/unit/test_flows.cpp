#include <gtest/gtest.h>

#include <random>

#include "bellman/flows.hpp"
#include "support.hpp"

using namespace bellman;
using namespace testing_support;

namespace {

SpecialFlow unit_flow(InitialDatum d, double speed = 1.0) {
  Vector a(1);
  a << std::sqrt(speed);
  return make_special_flow(std::move(d), a, SymMatrix::identity(1));
}

const QuadratureRule& gh(int m) { return gauss_hermite(m); }

}  // namespace

TEST(Quadrature, HermiteMoments) {
  for (int m : {16, 64, 128, 256}) {
    const auto& r = gh(m);
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    for (int i = 0; i < m; ++i) {
      const double x = r.nodes[i], w = r.weights[i];
      s0 += w;
      s1 += w * x;
      s2 += w * x * x;
      s3 += w * x * x * x;
    }
    EXPECT_NEAR(s0, 1.0, 1e-13);
    EXPECT_NEAR(s1, 0.0, 1e-12);
    EXPECT_NEAR(s3, 0.0, 1e-12);
    EXPECT_NEAR(s2, 1.0, 1e-12);
  }
  // E Z^8 = 105.
  EXPECT_NEAR(expectation([](double x) { return std::pow(x, 8); }, gh(16)), 105.0, 1e-10);
}

TEST(Quadrature, LegendreAndAdaptive) {
  const auto r = gauss_legendre(10, 0, 2);
  EXPECT_NEAR(expectation([](double x) { return x * x * x; }, r), 4.0, 1e-13);
  const auto i = integrate([](double x) { return std::exp(-x); }, 0, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(i.value, 1.0, 1e-12);
}

TEST(HeatFlowSpecial, Examples) {
  const auto& r = gh(128);
  const auto c = unit_flow(SmoothDatum{[](double) { return 3.0; }}, 2.0);
  const auto lin = unit_flow(SmoothDatum{[](double y) { return y; }}, 2.0);
  const auto sq = unit_flow(SmoothDatum{[](double y) { return y * y; }}, 2.0);
  for (double t : {0.0, 0.3, 1.7}) {
    EXPECT_NEAR(heat_flow_special(c, 0.4, t, r), 3.0, 1e-13);
    EXPECT_NEAR(heat_flow_special(lin, 0.4, t, r), 0.4, 1e-13);
    EXPECT_NEAR(heat_flow_special(sq, 0.4, t, r), 0.16 + 2 * t * 2.0, 1e-12);
  }
  EXPECT_THROW(heat_flow_special(c, 0.0, -1.0, r), usage_error);
  Vector a(2);
  a << 1, 0;
  Matrix cm(2, 2);
  cm << 0, 1, 1, 0;
  EXPECT_THROW(make_special_flow(BumpDatum{}, a, SymMatrix(cm)), usage_error);
}

TEST(HeatFlowSpecial, ClosedFormsAgreeWithQuadrature) {
  const auto& r = gh(256);
  const IndicatorDatum ind{{{-1.0, 0.5}, {2.0, 3.0}}, 0.2, 0.1, 0.7};
  const BumpDatum bump{0.5, 0.3, 0.4, 0.6};
  const PiecewiseLinearDatum pl{{-1, 0, 2}, {0.2, 1.0, 0.4}};
  for (const InitialDatum& d : {InitialDatum(ind), InitialDatum(bump), InitialDatum(pl)}) {
    for (double y : {-1.3, 0.0, 0.7, 2.4}) {
      for (double s : {0.5, 1.0, 2.0}) {
        // Oracle: adaptive Gauss-Kronrod of F(y + s z) phi(z) split at the knots.
        std::vector<double> cuts;
        for (int i = 0; i <= 56; ++i) cuts.push_back(-14.0 + 0.5 * i);
        if (const auto* p = std::get_if<PiecewiseLinearDatum>(&d)) {
          for (double k : p->x) cuts.push_back((k - y) / s);
        }
        std::sort(cuts.begin(), cuts.end());
        double v = 0, g = 0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
          v += integrate([&](double z) { return datum_value(d, y + s * z) * normal_pdf(z); }, cuts[i],
                         cuts[i + 1], 1e-14)
                   .value;
          g += integrate([&](double z) { return datum_value(d, y + s * z) * z * normal_pdf(z); }, cuts[i],
                         cuts[i + 1], 1e-14)
                   .value;
        }
        const auto exact = gaussian_smoothing(d, y, s, r);
        EXPECT_NEAR(exact.value, v, 1e-12);
        EXPECT_NEAR(exact.d1, g / s, 1e-11);
      }
    }
  }
}

TEST(HeatFlowSpecial, SmoothedDerivativesMatchFiniteDifferences) {
  const auto& r = gh(64);
  const IndicatorDatum ind{{{-1.0, 0.5}}, 0.2};
  const PiecewiseLinearDatum pl{{-1, 0, 2}, {0.2, 1.0, 0.4}};
  for (const InitialDatum& d : {InitialDatum(ind), InitialDatum(pl), InitialDatum(BumpDatum{0, 1, 0.3, 0.7})}) {
    for (double y : {-0.8, 0.1, 1.5}) {
      const double h = 1e-4, s = 0.6;
      const auto m = gaussian_smoothing(d, y, s, r);
      const double vp = gaussian_smoothing(d, y + h, s, r).value;
      const double vm = gaussian_smoothing(d, y - h, s, r).value;
      EXPECT_NEAR(m.d1, (vp - vm) / (2 * h), 1e-7);
      EXPECT_NEAR(m.d2, (vp - 2 * m.value + vm) / (h * h), 1e-5);
    }
  }
}

TEST(FlowPdeResidual, Examples) {
  const auto& r = gh(64);
  const auto sq = unit_flow(SmoothDatum{[](double y) { return y * y; }}, 1.5);
  EXPECT_LE(std::abs(flow_pde_residual(sq, 0.3, 0.5, 1e-3, r)), 1e-6);
  const auto bump = unit_flow(SmoothDatum{[](double y) { return std::exp(-y * y); }}, 1.0);
  EXPECT_LE(std::abs(flow_pde_residual(bump, 0.2, 0.5, 1e-3, r)), 1e-4);
  const auto sn = unit_flow(SmoothDatum{[](double y) { return std::sin(y); }}, 0.8);
  EXPECT_LE(std::abs(flow_pde_residual(sn, 0.9, 0.5, 1e-3, r)), 1e-4);
  EXPECT_NEAR(heat_flow_special(sn, 0.9, 0.5, r), std::exp(-0.8 * 0.5) * std::sin(0.9), 1e-12);
}

TEST(GradientIdentity, Examples) {
  const auto& r = gh(64);
  Vector a = Vector::Unit(3, 0);
  const auto f = make_special_flow(SmoothDatum{[](double y) { return std::tanh(y); }}, a,
                                   SymMatrix::identity(3));
  Vector x(3);
  x << 0.2, -0.4, 1.0;
  EXPECT_LE(gradient_identity_check(f, x, 0.4, r), 1e-6);
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10; ++i) {
    Vector u = random_vector(rng, 3).normalized();
    const auto g = make_special_flow(SmoothDatum{[](double y) { return std::tanh(0.5 * y); }}, u,
                                     SymMatrix::identity(3));
    EXPECT_LE(gradient_identity_check(g, random_vector(rng, 3), 0.3, r), 1e-5);
  }
  const auto c = make_special_flow(SmoothDatum{[](double) { return 2.0; }}, a, SymMatrix::identity(3));
  EXPECT_LE(gradient_identity_check(c, x, 0.4, r), 1e-15);
}

TEST(OuSemigroup, Examples) {
  const auto& r = gh(64);
  auto f = [](const Vector& y) { return std::cos(y(0)) * std::exp(-0.1 * y(1) * y(1)); };
  Vector x(2);
  x << 0.3, -1.2;
  EXPECT_EQ(ou_semigroup(f, 0.0, x, r), f(x));
  const double mean = tensor_expectation(f, 2, r);
  EXPECT_NEAR(ou_semigroup(f, 20.0, x, r), mean, 1e-8);
  for (double c : {0.5, 1.0, 2.0}) {
    for (double t : {0.1, 0.7}) {
      Vector y(1);
      y << 0.4;
      const double expected = std::exp(c * std::exp(-t) * 0.4 + 0.5 * c * c * (1 - std::exp(-2 * t)));
      EXPECT_NEAR(ou_semigroup([c](const Vector& z) { return std::exp(c * z(0)); }, t, y, r), expected,
                  1e-12 * expected);
    }
  }
}

TEST(HeatFlowGeneral, Examples) {
  const auto& r = gh(32);
  Vector a(1);
  a << 0.8;
  const auto sf = make_special_flow(SmoothDatum{[](double y) { return std::sin(y) + y * y; }}, a,
                                    SymMatrix::identity(1));
  GeneralFlow g{[](const Vector& y) { return std::sin(y(0)) + y(0) * y(0); }, Matrix(a), SymMatrix::identity(1)};
  Vector x(1);
  x << 1.1;
  EXPECT_NEAR(heat_flow_general(g, x, 0.6, r), heat_flow_special(sf, 0.8 * 1.1, 0.6, r), 1e-12);

  Matrix am(2, 2);
  am << 1, 0.5, 0.2, 1;
  Matrix cm(2, 2);
  cm << 1, 0.3, 0.3, 2;
  GeneralFlow lin{[](const Vector& y) { return 2 * y(0) - y(1); }, am, SymMatrix(cm)};
  GeneralFlow quad{[](const Vector& y) { return y.squaredNorm(); }, am, SymMatrix(cm)};
  Vector x2(2);
  x2 << 0.4, -0.7;
  const Vector xa = am.transpose() * x2;
  EXPECT_NEAR(heat_flow_general(lin, x2, 0.9, r), 2 * xa(0) - xa(1), 1e-12);
  const double tr = (am.transpose() * cm * am).trace();
  EXPECT_NEAR(heat_flow_general(quad, x2, 0.9, r), xa.squaredNorm() + 2 * 0.9 * tr, 1e-11);

  GeneralFlow bad{[](const Vector&) { return 0.0; }, Matrix::Identity(2, 2), SymMatrix::zero(2)};
  EXPECT_THROW(heat_flow_general(bad, x2, 0.1, r), precondition_error);
}

TEST(HeatFlowGeneral, DiagonalFactorizes) {
  const auto& r = gh(32);
  Matrix am = Matrix::Identity(2, 2);
  Vector d(2);
  d << 0.7, 1.9;
  GeneralFlow g{[](const Vector& y) { return std::cos(y(0)) * std::exp(-y(1) * y(1)); }, am,
                SymMatrix::diagonal(d)};
  Vector e1 = Vector::Unit(2, 0), e2 = Vector::Unit(2, 1);
  const auto f1 = make_special_flow(SmoothDatum{[](double y) { return std::cos(y); }}, e1, SymMatrix::diagonal(d));
  const auto f2 = make_special_flow(SmoothDatum{[](double y) { return std::exp(-y * y); }}, e2,
                                    SymMatrix::diagonal(d));
  Vector x(2);
  x << 0.3, -0.5;
  const double t = 0.4;
  EXPECT_NEAR(heat_flow_general(g, x, t, r),
              heat_flow_special(f1, x(0), t, r) * heat_flow_special(f2, x(1), t, r), 1e-10);
}

TEST(Flows, SemigroupProperty) {
  const auto& r = gh(64);
  auto f0 = [](double y) { return std::cos(y) * std::exp(-0.5 * y * y); };
  const auto flow = unit_flow(SmoothDatum{f0}, 0.7);
  for (double y : {-1.0, 0.2, 2.0}) {
    const double t1 = 0.3, t2 = 0.45;
    const auto mid = unit_flow(SmoothDatum{[&](double z) { return heat_flow_special(flow, z, t1, r); }}, 0.7);
    EXPECT_NEAR(heat_flow_special(flow, y, t1 + t2, r), heat_flow_special(mid, y, t2, r), 1e-8);
  }
}

TEST(Flows, MassConservationAndPositivity) {
  const PiecewiseLinearDatum hat{{-1, 0, 1.5}, {0, 1, 0}};
  const auto flow = unit_flow(hat, 1.3);
  const double mass0 = 0.5 * 2.5;
  const auto grid = gauss_legendre(400, -30, 30);
  for (double t : {0.1, 1.0, 5.0}) {
    double mass = 0, lowest = 1;
    for (int i = 0; i < grid.order(); ++i) {
      const double u = heat_flow_special(flow, grid.nodes[i], t);
      mass += grid.weights[i] * u;
      lowest = std::min(lowest, u);
    }
    EXPECT_NEAR(mass, mass0, 1e-6);
    EXPECT_GE(lowest, -1e-12);
  }
}

TEST(Flows, OuContractsRange) {
  std::mt19937_64 rng(42);
  const IndicatorDatum d{{{-0.5, 1.0}}, 0.05, 0.2, 0.6};
  for (int i = 0; i < 200; ++i) {
    const double x = 4 * random_vector(rng, 1)(0);
    const double t = 0.05 + (i % 10) * 0.3;
    const double v = ou_semigroup(d, t, x, gh(64));
    EXPECT_GE(v, 0.2 - 1e-12);
    EXPECT_LE(v, 0.8 + 1e-12);
  }
}

TEST(ComposeV, Examples) {
  const auto b = borell_B(0.5);
  const double p = 0.5, s = std::sqrt(1 - p * p);
  Vector a1(2), a2(2);
  a1 << 1, 0;
  a2 << p, s;
  const IndicatorDatum d1{{{-std::numeric_limits<double>::infinity(), 0.3}}, 0.3, 0.05, 0.9};
  const IndicatorDatum d2{{{-0.5, std::numeric_limits<double>::infinity()}}, 0.3, 0.05, 0.9};
  std::vector<SpecialFlow> flows = {make_special_flow(d1, a1, SymMatrix::identity(2)),
                                    make_special_flow(d2, a2, SymMatrix::identity(2))};
  Vector x(2);
  x << 0.2, -0.1;
  Vector u0(2);
  u0 << datum_value(d1, 0.2), datum_value(d2, p * 0.2 - s * 0.1);
  EXPECT_NEAR(compose_V(b, flows, x, 0.0).value, b.value(u0), 1e-10);
  // t = 1/2, x = 0: each flow equals the γ1 integral of its datum.
  Vector zero = Vector::Zero(2);
  const auto& r = gh(256);
  Vector means(2);
  means << expectation([&](double y) { return datum_value(d1, y); }, r),
      expectation([&](double y) { return datum_value(d2, y); }, r);
  EXPECT_NEAR(compose_V(b, flows, zero, 0.5).value, b.value(means), 1e-10);

  const BumpDatum c{0.4, 0.0, 0.0, 1.0};
  std::vector<SpecialFlow> cf = {make_special_flow(c, a1, SymMatrix::identity(2)),
                                 make_special_flow(c, a2, SymMatrix::identity(2))};
  Vector u(2);
  u << 0.4, 0.4;
  EXPECT_NEAR(compose_V(b, cf, x, 0.7).value, b.value(u), 1e-14);

  const BumpDatum out{1.5, 0.0, 0.0, 1.0};
  std::vector<SpecialFlow> bad = {make_special_flow(out, a1, SymMatrix::identity(2)), cf[1]};
  EXPECT_THROW(compose_V(b, bad, x, 0.7), domain_error);
  const BumpDatum edge{1.0, 0.0, 0.0, 1.0};
  std::vector<SpecialFlow> clamp = {make_special_flow(edge, a1, SymMatrix::identity(2)), cf[1]};
  EXPECT_EQ(compose_V(b, clamp, x, 0.7).clamps, 1);
}

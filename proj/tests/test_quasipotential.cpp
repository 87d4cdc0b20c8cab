#include <doctest.h>

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bdex/quasipotential.hpp"

using namespace bdex;
using namespace bdex::qp;

namespace {

double h_oracle(double x, double y) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double s) { return (x - s) / (s * (1.0 - s)); }, y, x, 15, 1e-15);
}

DensityField bump(const DensityField& base, double eps) {
  DensityField out = base;
  for (int n = 0; n < base.mesh().node_count(); ++n) {
    const double u = base.mesh().center(n)[0];
    out[n] += eps * std::sin(M_PI * (u + 1.0) / 2.0);
  }
  return out;
}

}  // namespace

TEST_CASE("power schedules") {
  for (double p : {0.6, 1.0, 2.5}) {
    const auto s = InterpolationSchedule::power(p);
    CHECK(s.alpha(0.0) == 0.0);
    CHECK(s.alpha(1.0) == 1.0);
    CHECK(s.integral_alpha_squared() == doctest::Approx(1.0 / (2.0 * p + 1.0)));
    CHECK(s.integral_derivative_squared() == doctest::Approx(p * p / (2.0 * p - 1.0)));
    for (double t = 0.05; t < 1.0; t += 0.05) CHECK(s.alpha(t) < s.alpha(t + 0.05) + 1e-15);
  }
  CHECK_THROWS(InterpolationSchedule::power(0.5));
}

TEST_CASE("cubic schedules are monotone C1 interpolants with accurate integrals") {
  const auto s = InterpolationSchedule::cubic({0.0, 0.02, 0.3, 0.35, 0.9, 1.0});
  CHECK(s.alpha(0.0) == 0.0);
  CHECK(s.alpha(1.0) == 1.0);
  CHECK(s.alpha(0.4) == doctest::Approx(0.3));
  CHECK(s.alpha(0.6) == doctest::Approx(0.35));
  double prev = 0.0;
  double a2 = 0.0, d2 = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double t = (k + 0.5) / n;
    const double v = s.alpha(t);
    CHECK(v >= prev);
    prev = v;
    a2 += v * v / n;
    d2 += s.derivative(t) * s.derivative(t) / n;
  }
  CHECK(s.integral_alpha_squared() == doctest::Approx(a2).epsilon(1e-8));
  CHECK(s.integral_derivative_squared() == doctest::Approx(d2).epsilon(1e-8));
  for (double knot : {0.2, 0.4, 0.6, 0.8}) {
    CHECK(s.derivative(knot - 1e-9) == doctest::Approx(s.derivative(knot + 1e-9)).epsilon(1e-6));
  }
  CHECK_THROWS(InterpolationSchedule::cubic({0.0, 0.5, 0.4, 1.0}));
  CHECK_THROWS(InterpolationSchedule::cubic({0.1, 1.0}));
}

TEST_CASE("interpolation path endpoints and midpoint") {
  const Mesh mesh{1, 16, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const auto rhoBar = pde::solve_elliptic(b, 0.5, mesh);
  const auto rho = bump(rhoBar, 0.1);
  const auto path = interpolation_path(rho, rhoBar, InterpolationSchedule::power(1.0), 8);
  REQUIRE(path.frame_count() == 9);
  for (int n = 0; n < mesh.node_count(); ++n) {
    CHECK(path.frames.front()[n] == rhoBar[n]);
    CHECK(path.frames.back()[n] == rho[n]);
    CHECK(path.frames[4][n] == doctest::Approx(0.5 * (rho[n] + rhoBar[n])).epsilon(1e-15));
  }
  CHECK_THROWS(interpolation_path(rho, DensityField::constant(Mesh{1, 8, 1}, 0.5), InterpolationSchedule::power(1.0)));
}

TEST_CASE("interpolation estimate of the stationary profile is zero") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const auto rhoBar = pde::solve_elliptic(b, 1.0, mesh);
  const auto est = quasipotential_upper_interpolation(rhoBar, b, 1.0, ScheduleFamily::Power);
  CHECK(est.value < 1e-12);
  CHECK(est.value >= 0.0);
}

TEST_CASE("interpolation estimates decay quadratically near the stationary profile") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const double a = 0.5;
  const auto rhoBar = pde::solve_elliptic(b, a, mesh);
  std::vector<double> cost;
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    const auto est = quasipotential_upper_interpolation(bump(rhoBar, eps), b, a, ScheduleFamily::Power);
    CHECK_FALSE(est.diagnostics.at("boundaryConditionFlag").get<bool>());
    cost.push_back(est.value);
  }
  for (std::size_t k = 1; k < cost.size(); ++k) {
    CHECK(cost[k] < cost[k - 1]);
    CHECK(cost[k] / cost[k - 1] <= 0.35);
  }
  CHECK(cost.back() / (0.025 * 0.025) < 2.0 * cost[1] / (0.1 * 0.1));
}

TEST_CASE("cubic refinement never does worse than the best power law") {
  const Mesh mesh{1, 24, 1};
  const auto b = BoundaryProfile::two_sided(0.3, 0.6);
  const auto rhoBar = pde::solve_elliptic(b, 0.0, mesh);
  const auto rho = bump(rhoBar, 0.15);
  InterpolationOptions opt;
  opt.frames = 32;
  const auto power = quasipotential_upper_interpolation(rho, b, 0.0, ScheduleFamily::Power, opt);
  const auto cubic = quasipotential_upper_interpolation(rho, b, 0.0, ScheduleFamily::Cubic, opt);
  CHECK(cubic.value <= power.value + 1e-12);
}

TEST_CASE("cost of power-schedule paths is bounded by an affine function of the schedule integrals") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const auto rhoBar = pde::solve_elliptic(b, 0.0, mesh);
  const auto rho = bump(rhoBar, 0.1);
  std::vector<double> x1, x2, y;
  for (double p : {0.7, 1.0, 1.5, 2.0, 3.0, 4.0}) {
    const auto s = InterpolationSchedule::power(p);
    const auto path = interpolation_path(rho, rhoBar, s, 64);
    y.push_back(func::rate_functional_IT(path, b, 0.0).report.IT);
    x1.push_back(s.integral_derivative_squared());
    x2.push_back(s.integral_alpha_squared());
  }
  // Least squares y ~ c1 x1 + c2 x2 without intercept.
  double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    s11 += x1[k] * x1[k];
    s12 += x1[k] * x2[k];
    s22 += x2[k] * x2[k];
    r1 += x1[k] * y[k];
    r2 += x2[k] * y[k];
  }
  const double det = s11 * s22 - s12 * s12;
  const double c1 = (r1 * s22 - r2 * s12) / det;
  const double c2 = (s11 * r2 - s12 * r1) / det;
  MESSAGE("fitted coefficients ", c1, " ", c2);
  CHECK(c1 >= 0.0);
  CHECK(c2 >= 0.0);
  // The bound with doubled coefficients covers every measurement.
  const double c = 2.0 * std::max(c1, c2);
  for (std::size_t k = 0; k < y.size(); ++k) CHECK(y[k] <= c * (x1[k] + x2[k]));
}

TEST_CASE("reversal of the stationary profile costs nothing") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const auto rhoBar = pde::solve_elliptic(b, 1.0, mesh);
  const auto est = quasipotential_upper_reversal(rhoBar, b, 1.0);
  CHECK(est.value < 1e-8);
  CHECK(est.diagnostics.at("reachedTolerance").get<bool>());
}

TEST_CASE("reversal cost respects the dissipation bound") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  Rng rng(RngSpec{3, 0});
  for (double a : {0.0, 1.0, -0.4}) {
    for (int k = 0; k < 3; ++k) {
      ReversalOptions opt;
      opt.T = 1.0;
      const auto est = quasipotential_upper_reversal(random_density_field(mesh, rng), b, a, opt);
      const double it = est.diagnostics.at("reversalIT").get<double>();
      const double et = est.diagnostics.at("relaxationET").get<double>();
      CHECK(it <= std::max(1.0, 1.0 + 2.0 * a) * et * (1.0 + 1e-8));
      CHECK(est.diagnostics.at("reversalBoundHolds").get<bool>());
    }
  }
}

TEST_CASE("reversible case: reversal converges in T to the relative free energy") {
  const Mesh mesh{1, 64, 1};
  const auto b = BoundaryProfile::constant(0.3);
  const auto rho = DensityField::constant(mesh, 0.5);
  const double target = 2.0 * h_oracle(0.5, 0.3);
  CHECK(func::relative_free_energy(rho, DensityField::constant(mesh, 0.3)) == doctest::Approx(target).epsilon(1e-12));
  std::vector<double> err;
  for (double T : {2.0, 4.0, 8.0}) {
    ReversalOptions opt;
    opt.T = T;
    const auto est = quasipotential_upper_reversal(rho, b, 0.0, opt);
    err.push_back(std::abs(est.value - target) / target);
  }
  MESSAGE("relative errors ", err[0], " ", err[1], " ", err[2]);
  CHECK(err[2] <= err[0] + 1e-9);
  CHECK(err[2] < 0.05);
  const auto interp = quasipotential_upper_interpolation(rho, b, 0.0, ScheduleFamily::Power);
  ReversalOptions opt;
  const auto rev = quasipotential_upper_reversal(rho, b, 0.0, opt);
  CHECK(interp.value >= rev.value);
  CHECK(interp.diagnostics.at("boundaryConditionFlag").get<bool>());
}

TEST_CASE("best_of picks the smaller estimate") {
  QuasiPotentialEstimate x, y;
  x.value = 0.3;
  x.method = EstimateMethod::Interpolation;
  y.value = 0.2;
  y.method = EstimateMethod::Reversal;
  const auto z = best_of(x, y);
  CHECK(z.value <= x.value);
  CHECK(z.value <= y.value);
  CHECK(z.method == EstimateMethod::BestOf);
  CHECK(z.to_json().at("method") == "best-of");
}

TEST_CASE("random density fields stay in [0,1] and often touch the ends") {
  const Mesh mesh{2, 16, 4};
  Rng rng(RngSpec{8, 0});
  int touching = 0;
  for (int k = 0; k < 200; ++k) {
    const auto f = random_density_field(mesh, rng);
    CHECK(f.min() >= 0.0);
    CHECK(f.max() <= 1.0);
    if (f.min() == 0.0 || f.max() == 1.0) ++touching;
  }
  CHECK(touching > 40);
}

TEST_CASE("boundedness sweep: finite, nested, extremes included") {
  const Mesh mesh{1, 16, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  ReversalOptions opt;
  opt.residual.frames = 16;
  const auto small = boundedness_sweep(b, 0.5, mesh, 5, RngSpec{12, 0}, opt);
  const auto large = boundedness_sweep(b, 0.5, mesh, 8, RngSpec{12, 0}, opt);
  CHECK(small.allFinite);
  CHECK(large.allFinite);
  REQUIRE(small.estimates.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(small.estimates[i] == large.estimates[i]);
  CHECK(small.estimates[2] < 1e-8);
  CHECK(small.estimates[0] > 0.0);
  CHECK(small.estimates[1] > 0.0);
  CHECK(large.max >= small.max);
  CHECK(small.quantile(1.0) == small.max);
  CHECK(small.quantile(0.0) <= small.quantile(0.5));
}

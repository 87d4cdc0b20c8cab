#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bdex/functionals.hpp"
#include "bdex/rng.hpp"

using namespace bdex;
using namespace bdex::func;
using pde::cfl_bound;
using pde::solve_parabolic;

namespace {

Trajectory frozen(const DensityField& rho, double T, int steps) {
  Trajectory out{rho.mesh(), T / steps, {}};
  for (int k = 0; k <= steps; ++k) out.frames.emplace_back(rho.values().begin(), rho.values().end());
  return out;
}

// Smooth data vanishing at the faces added to the stationary profile.
DensityField smooth_bump(const Mesh& mesh, double amplitude, double base = 0.5, double slope = 0.3) {
  return DensityField::from_function(mesh, [&](std::span<const double> u) {
    double v = base + slope * u[0] + amplitude * std::sin(M_PI * (u[0] + 1.0) / 2.0);
    if (u.size() > 1) v += 0.5 * amplitude * std::cos(2.0 * M_PI * u[1]) * std::sin(M_PI * (u[0] + 1.0));
    return v;
  });
}

// A random trajectory: smooth space-time modes around a level, inside (0.05, 0.95).
Trajectory smooth_trajectory(const Mesh& mesh, int steps, double T, Rng& rng) {
  std::array<double, 6> c{};
  for (double& x : c) x = 0.15 * rng.normal();
  Trajectory out{mesh, T / steps, {}};
  for (int k = 0; k <= steps; ++k) {
    const double t = k * out.dt;
    std::vector<double> v(mesh.node_count());
    for (int n = 0; n < mesh.node_count(); ++n) {
      const auto u = mesh.center(n);
      double s = 0.5 + 0.2 * u[0];
      s += c[0] * std::sin(M_PI * (u[0] + 1.0)) * std::cos(2.0 * t);
      s += c[1] * std::cos(1.5 * M_PI * u[0]) * t;
      s += c[2] * std::sin(0.5 * M_PI * (u[0] + 1.0)) * std::sin(3.0 * t);
      if (mesh.d > 1) s += c[3] * std::cos(2.0 * M_PI * u[1]) * (1.0 + t);
      v[n] = std::clamp(s, 0.05, 0.95);
    }
    out.frames.push_back(std::move(v));
  }
  return out;
}

TestField sample_test_field(const Trajectory& traj, Rng& rng) {
  const int m = 1 + static_cast<int>(rng.below(4));
  const double amp = std::exp(2.0 * rng.normal() - 1.0);
  const double w = 3.0 * rng.uniform();
  const double ph = 6.28 * rng.uniform();
  const double q = rng.normal();
  return TestField::from_function(traj, [&](double t, std::span<const double> u) {
    double g = amp * std::sin(m * M_PI * (u[0] + 1.0) / 2.0) * std::cos(w * t + ph);
    if (u.size() > 1) g *= 1.0 + q * std::sin(2.0 * M_PI * u[1]);
    return g;
  });
}

}  // namespace

TEST_CASE("time derivative and trapezoid weights") {
  const auto w = time_weights(5, 0.1);
  CHECK(w == std::vector<double>{0.05, 0.1, 0.1, 0.1, 0.05});
  std::vector<std::vector<double>> f{{0.0}, {1.0}, {4.0}, {9.0}};
  const auto d = time_derivative(f, 1.0);
  CHECK(d[0][0] == 1.0);
  CHECK(d[1][0] == 2.0);
  CHECK(d[2][0] == 4.0);
  CHECK(d[3][0] == 5.0);
}

TEST_CASE("energy QT") {
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  SUBCASE("constant in space") {
    const Mesh mesh{2, 16, 4};
    CHECK(energy_QT(frozen(DensityField::constant(mesh, 0.4), 1.0, 4), BoundaryProfile::constant(0.4)) == 0.0);
  }
  SUBCASE("linear profile 0.5 + 0.3u over unit time") {
    for (const Mesh mesh : {Mesh{1, 8, 1}, Mesh{1, 33, 1}, Mesh{2, 10, 3}}) {
      const auto rho = DensityField::from_function(mesh, [](std::span<const double> u) { return 0.5 + 0.3 * u[0]; });
      CHECK(energy_QT(frozen(rho, 1.0, 3), b) == doctest::Approx(0.18).epsilon(1e-12));
    }
  }
  SUBCASE("closed form dominates the variational dictionary and the gap closes under refinement") {
    const Mesh mesh{1, 64, 1};
    Rng rng(RngSpec{31, 0});
    const auto traj = smooth_trajectory(mesh, 8, 1.0, rng);
    const double closed = energy_QT(traj, b);
    const auto faces = pde::mesh_faces(mesh);
    // sup over compactly supported face fields G of 2<rho, dG> - |G|^2, G spanned by the first K sine modes.
    auto dictionary_value = [&](int K) {
      const auto w = time_weights(traj.frame_count(), traj.dt);
      double total = 0.0;
      for (int k = 0; k < traj.frame_count(); ++k) {
        const auto& rho = traj.frames[k];
        std::vector<double> grad;
        std::vector<double> u;
        for (const auto& f : faces) {
          if (f.on_boundary()) continue;
          grad.push_back((rho[f.hi] - rho[f.lo]) / f.distance);
          u.push_back(-1.0 + (f.hi) * mesh.h1());
        }
        // Best G in span{sin(m pi (u+1)/2)} by least squares against -grad (Gram system).
        Eigen::MatrixXd A(grad.size(), K);
        Eigen::VectorXd y(grad.size());
        for (std::size_t i = 0; i < grad.size(); ++i) {
          y(i) = -grad[i];
          for (int m = 0; m < K; ++m) A(i, m) = std::sin((m + 1) * M_PI * (u[i] + 1.0) / 2.0);
        }
        const Eigen::VectorXd coef = (A.transpose() * A).ldlt().solve(A.transpose() * y);
        const Eigen::VectorXd G = A * coef;
        double val = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) val += mesh.h1() * (-2.0 * G(i) * grad[i] - G(i) * G(i));
        total += w[k] * val;
      }
      return total;
    };
    const double coarse = dictionary_value(4);
    const double fine = dictionary_value(40);
    CHECK(coarse <= closed + 1e-12);
    CHECK(fine <= closed + 1e-12);
    CHECK(closed - fine < closed - coarse);
  }
}

TEST_CASE("dissipation ET") {
  SUBCASE("constant trajectory") {
    const Mesh mesh{1, 16, 1};
    CHECK(dissipation_ET(frozen(DensityField::constant(mesh, 0.3), 1.0, 2), BoundaryProfile::constant(0.3)) == 0.0);
  }
  SUBCASE("linear profile against adaptive quadrature") {
    const double exact = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [](double u) {
          const double r = 0.5 + 0.3 * u;
          return 0.09 / (r * (1.0 - r));
        },
        -1.0, 1.0, 15, 1e-14);
    const auto b = BoundaryProfile::two_sided(0.2, 0.8);
    double previous = INFINITY;
    for (int M : {32, 64, 128, 256}) {
      const Mesh mesh{1, M, 1};
      const auto rho = DensityField::from_function(mesh, [](std::span<const double> u) { return 0.5 + 0.3 * u[0]; });
      const double err = std::abs(dissipation_ET(frozen(rho, 1.0, 1), b) - exact);
      CHECK(err < previous);
      previous = err;
    }
    CHECK(previous / exact < 1e-4);
  }
  SUBCASE("frames touching 0 or 1 are flagged") {
    const Mesh mesh{1, 8, 1};
    std::vector<double> v(8, 0.5);
    v[3] = 0.0;
    int flagged = -1;
    const double e = dissipation_ET(frozen(DensityField(mesh, v), 1.0, 2), BoundaryProfile::constant(0.5), &flagged);
    CHECK(flagged == 3);
    CHECK(std::isfinite(e));
  }
}

TEST_CASE("evaluate_JG") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.25, 0.7);
  Rng rng(RngSpec{5, 0});
  const auto traj = smooth_trajectory(mesh, 20, 0.5, rng);
  SUBCASE("G = 0 gives 0") { CHECK(evaluate_JG(traj, TestField::zero(traj), b, 0.7) == 0.0); }
  SUBCASE("quadratic structure in the scale of G") {
    const auto G = sample_test_field(traj, rng);
    const double j1 = evaluate_JG(traj, G, b, 0.7);
    const double jh = evaluate_JG(traj, G.scaled(0.5), b, 0.7);
    const double jq = evaluate_JG(traj, G.scaled(0.25), b, 0.7);
    // J(e) = e L - e^2 Q: solve from e = 1, 1/2 and predict e = 1/4.
    const double Q = 2.0 * (2.0 * jh - j1);
    const double L = j1 + Q;
    CHECK(Q >= 0.0);
    CHECK(std::abs(jq - (0.25 * L - 0.0625 * Q)) < 1e-10 * (std::abs(L) + Q + 1.0));
  }
  SUBCASE("grid mismatch is rejected") {
    auto G = TestField::zero(traj);
    G.frames.pop_back();
    CHECK_THROWS_AS(evaluate_JG(traj, G, b, 0.7), GridMismatch);
  }
}

TEST_CASE("evaluate_JG on parabolic solutions: the linear part vanishes under refinement") {
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const double a = 0.5;
  double previous = INFINITY;
  for (int M : {16, 32, 64}) {
    const Mesh mesh{1, M, 1};
    const auto sol = solve_parabolic(smooth_bump(mesh, 0.15), b, a, 0.5, 0.5 * cfl_bound(mesh, a));
    const auto G = TestField::from_function(sol.trajectory, [](double t, std::span<const double> u) {
      return std::sin(M_PI * (u[0] + 1.0) / 2.0) * (1.0 + t);
    });
    const double j1 = evaluate_JG(sol.trajectory, G, b, a);
    const double jh = evaluate_JG(sol.trajectory, G.scaled(0.5), b, a);
    const double Q = 2.0 * (2.0 * jh - j1);
    const double linear = j1 + Q;
    CHECK(j1 <= std::abs(linear) + 1e-12);
    CHECK(std::abs(linear) < previous);
    previous = std::abs(linear);
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("rate functional: optimiser attains the supremum") {
  Rng rng(RngSpec{17, 0});
  for (const Mesh mesh : {Mesh{1, 24, 1}, Mesh{2, 12, 6}}) {
    for (double a : {0.0, 1.3, -0.35}) {
      const auto b = BoundaryProfile::two_sided(0.3, 0.65);
      const auto traj = smooth_trajectory(mesh, 12, 0.6, rng);
      FunctionalOptions opt;
      opt.keepOptimizer = true;
      const auto res = rate_functional_IT(traj, b, a, opt);
      REQUIRE(res.optimizer.has_value());
      const double it = res.report.IT;
      CHECK(it > 0.0);
      CHECK(std::abs(evaluate_JG(traj, *res.optimizer, b, a) - it) < 1e-8 * std::max(1.0, it));
      for (int k = 0; k < 30; ++k) CHECK(evaluate_JG(traj, sample_test_field(traj, rng), b, a) <= it + 1e-8);
      for (double s : {0.9, 1.1}) CHECK(evaluate_JG(traj, res.optimizer->scaled(s), b, a) <= it + 1e-8);
      double sum = 0.0;
      for (std::size_t k = 0; k < res.report.perSlice.size(); ++k) {
        CHECK(res.report.perSlice[k] >= -1e-10);
        sum += res.report.sliceWeights[k] * res.report.perSlice[k];
      }
      CHECK(sum == doctest::Approx(it).epsilon(1e-14));
      CHECK(res.report.maxResidual < 1e-8);
    }
  }
}

TEST_CASE("rate functional: parallel slices give identical results") {
  Rng rng(RngSpec{18, 0});
  const Mesh mesh{2, 10, 5};
  const auto traj = smooth_trajectory(mesh, 30, 1.0, rng);
  const auto b = BoundaryProfile::constant(0.4);
  FunctionalOptions serial, threaded;
  threaded.jobs = 3;
  const auto r1 = rate_functional_IT(traj, b, 0.2, serial).report;
  const auto r2 = rate_functional_IT(traj, b, 0.2, threaded).report;
  CHECK(r1.IT == r2.IT);
  CHECK(r1.perSlice == r2.perSlice);
}

TEST_CASE("rate functional vanishes on parabolic solutions under refinement") {
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  for (double a : {0.0, 1.0}) {
    std::vector<double> values;
    int M = 16;
    double dt = 0.25 * cfl_bound(Mesh{1, M, 1}, a);
    for (int level = 0; level < 3; ++level) {
      const Mesh mesh{1, M, 1};
      const auto sol = solve_parabolic(smooth_bump(mesh, 0.2), b, a, 0.5, dt);
      values.push_back(rate_functional_IT(sol.trajectory, b, a).report.IT);
      M *= 2;
      dt /= 4.0;
    }
    MESSAGE("a = ", a, ": ", values[0], " ", values[1], " ", values[2]);
    CHECK(values[1] < 0.5 * values[0]);
    CHECK(values[2] < 0.5 * values[1]);
  }
}

TEST_CASE("rate functional: perturbed solutions cost at least c delta^2") {
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const double a = 0.5;
  std::vector<double> fitted;
  for (int M : {16, 32}) {
    const Mesh mesh{1, M, 1};
    const auto sol = solve_parabolic(smooth_bump(mesh, 0.2), b, a, 0.5, 0.25 * cfl_bound(mesh, a), 4);
    std::vector<double> ratio;
    for (double delta : {0.02, 0.04, 0.08}) {
      Trajectory perturbed = sol.trajectory;
      for (int k = 0; k < perturbed.frame_count(); ++k) {
        const double t = perturbed.time(k);
        for (int n = 0; n < mesh.node_count(); ++n) {
          const double u = mesh.center(n)[0];
          perturbed.frames[k][n] += delta * std::sin(M_PI * (u + 1.0)) * std::sin(4.0 * t);
        }
      }
      ratio.push_back(rate_functional_IT(perturbed, b, a).report.IT / (delta * delta));
    }
    for (double r : ratio) CHECK(r > 0.0);
    fitted.push_back(ratio.back());
  }
  CHECK(fitted[1] > 0.5 * fitted[0]);
  CHECK(fitted[1] < 2.0 * fitted[0]);
}

TEST_CASE("rate functional: time additivity") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.3, 0.6);
  Rng rng(RngSpec{19, 0});
  const auto traj = smooth_trajectory(mesh, 400, 1.0, rng);
  const auto whole = rate_functional_IT(traj, b, 0.4).report;
  const auto first = rate_functional_IT(traj.slice(0, 200), b, 0.4).report;
  const auto second = rate_functional_IT(traj.slice(200, 400), b, 0.4).report;
  const double maxSlice = *std::max_element(whole.perSlice.begin(), whole.perSlice.end());
  CHECK(std::abs(whole.IT - first.IT - second.IT) <= 2.0 * traj.dt * maxSlice);
}

TEST_CASE("rate functional: staying away from the stationary profile costs linearly in T") {
  const Mesh mesh{1, 32, 1};
  const auto b = BoundaryProfile::two_sided(0.2, 0.8);
  const auto rho = DensityField::constant(mesh, 0.5);
  std::vector<double> values;
  for (double T : {1.0, 2.0, 4.0}) values.push_back(rate_functional_IT(frozen(rho, T, 8), b, 0.3).report.IT);
  CHECK(values[0] > 0.0);
  CHECK(values[1] == doctest::Approx(2.0 * values[0]).epsilon(1e-12));
  CHECK(values[2] == doctest::Approx(4.0 * values[0]).epsilon(1e-12));
}

TEST_CASE("rate functional handles degenerate densities") {
  const Mesh mesh{1, 16, 1};
  std::vector<double> v(16, 0.0);
  for (int i = 8; i < 16; ++i) v[i] = 1.0;
  const auto res = rate_functional_IT(frozen(DensityField(mesh, v), 1.0, 2), BoundaryProfile::two_sided(0.2, 0.8), 0.0);
  CHECK(std::isfinite(res.report.IT));
  CHECK(res.report.clippedWeights > 0);
  CHECK(res.report.degenerateFrames == 3);
}

TEST_CASE("relative entropy and free energy") {
  const Mesh mesh{1, 10, 1};
  const auto ref = DensityField::constant(mesh, 0.3);
  CHECK(relative_free_energy(ref, ref) == 0.0);
  // h(x, y) = int_y^x (x - s) / (s (1 - s)) ds as an independent oracle.
  const double h = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [](double s) { return (0.5 - s) / (s * (1.0 - s)); }, 0.3, 0.5, 15, 1e-15);
  CHECK(relative_free_energy(DensityField::constant(mesh, 0.5), ref) == doctest::Approx(2.0 * h).epsilon(1e-12));
  CHECK(bernoulli_relative_entropy(0.0, 0.3) == doctest::Approx(std::log(1.0 / 0.7)));
  CHECK(bernoulli_relative_entropy(1.0, 0.3) == doctest::Approx(std::log(1.0 / 0.3)));
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double x = i / 99.0;
      const double y = (j + 0.5) / 100.0;
      const double v = bernoulli_relative_entropy(x, y);
      REQUIRE(v >= 0.0);
      if (std::abs(x - y) > 1e-9) REQUIRE(v > 0.0);
    }
  }
  CHECK(bernoulli_relative_entropy(0.37, 0.37) == 0.0);
  CHECK_THROWS_AS(relative_free_energy(ref, DensityField::constant(mesh, 0.0)), DomainError);
  CHECK_THROWS_AS(relative_free_energy(ref, DensityField::constant(mesh, 1.0)), DomainError);
}

TEST_CASE("library random trajectories and test fields") {
  const Mesh mesh{2, 8, 4};
  Rng rng(RngSpec{40, 0});
  const auto traj = random_trajectory(mesh, 10, 2.0, rng);
  CHECK(traj.frame_count() == 11);
  CHECK(traj.horizon() == doctest::Approx(2.0));
  for (const auto& f : traj.frames) {
    for (double v : f) CHECK((v >= 0.05 && v <= 0.95));
  }
  const auto G = random_test_field(traj, rng);
  CHECK(G.frame_count() == 11);
  CHECK(G.mesh == mesh);
  Rng again(RngSpec{40, 0});
  CHECK(random_trajectory(mesh, 10, 2.0, again).frames == traj.frames);
}

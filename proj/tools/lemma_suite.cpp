#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "bdex/functionals.hpp"
#include "bdex/oracle.hpp"
#include "bdex/quasipotential.hpp"
#include "experiments.hpp"
#include "streams.hpp"

namespace bdex::cli {

namespace {

using pde::DensityField;
using pde::Mesh;
using pde::Trajectory;

constexpr int kFieldDraws = 8;

SuiteCheck at_most(std::string name, double value, double bound) {
  return {std::move(name), value, fmt::format("<= {:g}", bound), value <= bound};
}

SuiteCheck above(std::string name, double value, double bound) {
  return {std::move(name), value, fmt::format("> {:g}", bound), value > bound};
}

// Lattice small enough for the dense generator.
ModelParams oracle_model(const ExperimentConfig& c) { return {c.a, c.d, 2}; }

Trajectory frozen(const DensityField& rho, int steps, double T) {
  const auto v = rho.values();
  return {rho.mesh(), T / steps, std::vector<std::vector<double>>(steps + 1, std::vector<double>(v.begin(), v.end()))};
}

DensityField clamp_field(const DensityField& f, double lo, double hi) {
  DensityField out = f;
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return out;
}

DensityField evolve(const DensityField& rho, const BoundaryProfile& b, double a, double dt, int steps) {
  pde::ParabolicStepper s(rho, b, a, dt);
  for (int k = 0; k < steps; ++k) s.step();
  return s.state();
}

}  // namespace

std::vector<SuiteCheck> lemma_suite(const ExperimentConfig& c, int jobs) {
  std::vector<SuiteCheck> out;
  const auto b = c.boundary();
  const double a = c.a;
  std::uint64_t stream = kSuiteStreamBase;

  // Microscopic rates on random configurations of the configured lattice.
  {
    const LatticeGeometry geom(c.model());
    const Reservoirs res(geom, b);
    Rng rng(RngSpec{c.seed, stream++});
    double minRate = std::numeric_limits<double>::infinity();
    double asymmetry = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
      auto eta = Configuration::empty(geom);
      for (Site s = 0; s < geom.site_count(); ++s) eta.set(s, rng.uniform() < 0.5);
      for (const auto& e : enumerate_events(geom, res, eta)) {
        if (!e.changesState) continue;
        minRate = std::min(minRate, e.rate);
        if (e.event.kind == Event::Kind::Exchange) {
          const auto swapped = apply_exchange(geom, eta, e.event.x, e.event.y);
          asymmetry = std::max(asymmetry, std::abs(event_rate(geom, res, swapped, e.event) - e.rate));
        }
      }
    }
    out.push_back(above("rate positivity (min state-changing rate)", minRate, 0.0));
    out.push_back(at_most("exchange rate symmetry", asymmetry, 0.0));
  }

  // Exact generator on the smallest lattice.
  {
    const auto params = oracle_model(c);
    const LatticeGeometry geom(params);
    const Reservoirs res(geom, b);
    const auto L = oracle::build_generator(params, b);
    const auto fromEvents = oracle::generator_from_events(geom, b);
    out.push_back(at_most("generator constructions agree", (L - fromEvents).cwiseAbs().maxCoeff(), 0.0));
    double exitGap = 0.0;
    const double scale = static_cast<double>(params.N) * params.N;
    for (Eigen::Index s = 0; s < L.rows(); ++s) {
      const auto events = enumerate_events(geom, res, Configuration::from_code(geom.site_count(), s));
      exitGap = std::max(exitGap, std::abs(scale * exit_rate(events) + L(s, s)) / std::abs(L(s, s)));
    }
    out.push_back(at_most("exit rate matches diagonal", exitGap, 1e-12));
    const auto mu = oracle::stationary_vector(L);
    out.push_back(at_most("stationary residual", (mu.transpose() * L).cwiseAbs().maxCoeff() / L.cwiseAbs().maxCoeff(),
                          1e-12));
  }

  const Mesh mesh = c.mesh();
  const double cfl = pde::cfl_bound(mesh, a);
  const DensityField rhoBar = pde::solve_elliptic(b, a, mesh);

  // Discrete parabolic flow.
  {
    Rng rng(RngSpec{c.seed, stream++});
    const int steps = static_cast<int>(std::ceil(0.25 / cfl));
    double l1Increase = 0.0, orderViolation = 0.0, minMargin = 1.0;
    for (int draw = 0; draw < kFieldDraws; ++draw) {
      const auto f = qp::random_density_field(mesh, rng);
      const auto g = qp::random_density_field(mesh, rng);
      pde::ParabolicStepper sf(f, b, a, cfl), sg(g, b, a, cfl);
      double prev = pde::l1_distance(f, g);
      for (int k = 0; k < steps; ++k) {
        sf.step();
        sg.step();
        const double dist = pde::l1_distance(sf.state(), sg.state());
        l1Increase = std::max(l1Increase, dist - prev);
        prev = dist;
      }
      DensityField upper = f;
      for (double& v : upper.values()) v = std::min(1.0, v + 0.1 * rng.uniform());
      const auto lo = evolve(f, b, a, cfl, steps), hi = evolve(upper, b, a, cfl, steps);
      for (int n = 0; n < mesh.node_count(); ++n) orderViolation = std::max(orderViolation, lo[n] - hi[n]);
    }
    for (double level : {0.0, 1.0}) {
      const auto r = evolve(DensityField::constant(mesh, level), b, a, cfl, static_cast<int>(std::ceil(0.1 / cfl)));
      for (double v : r.values()) minMargin = std::min({minMargin, v, 1.0 - v});
    }
    out.push_back(at_most("L1 contraction (max increase per step)", l1Increase, 1e-12));
    out.push_back(at_most("comparison principle (max violation)", orderViolation, 1e-12));
    out.push_back(above("confinement at t = 0.1 from 0 and 1", minMargin, 0.0));
  }

  func::FunctionalOptions fopt;
  fopt.jobs = jobs;

  // Rate functional as a supremum.
  {
    Rng rng(RngSpec{c.seed, stream++});
    double minIT = std::numeric_limits<double>::infinity();
    double dictionaryExcess = -std::numeric_limits<double>::infinity();
    double optimizerGap = 0.0;
    fopt.keepOptimizer = true;
    for (int draw = 0; draw < c.trajectories; ++draw) {
      const auto traj = func::random_trajectory(mesh, 16, 0.5, rng);
      const auto res = func::rate_functional_IT(traj, b, a, fopt);
      const double it = res.report.IT;
      minIT = std::min(minIT, it);
      const double scale = std::max(1.0, it);
      optimizerGap = std::max(optimizerGap, std::abs(func::evaluate_JG(traj, *res.optimizer, b, a) - it) / scale);
      for (int k = 0; k < c.dictionary; ++k) {
        const auto G = func::random_test_field(traj, rng);
        dictionaryExcess = std::max(dictionaryExcess, (func::evaluate_JG(traj, G, b, a) - it) / scale);
      }
    }
    fopt.keepOptimizer = false;
    out.push_back(at_most("rate functional nonnegativity (-min IT)", -minIT, 1e-12));
    out.push_back(at_most("dictionary never exceeds IT", dictionaryExcess, 1e-8));
    out.push_back(at_most("optimizer attains IT", optimizerGap, 1e-8));
  }

  // Solutions cost nothing in the limit: IT shrinks under refinement.
  {
    const Mesh coarse{c.d, 16, c.d > 1 ? 4 : 1}, fine{c.d, 32, c.d > 1 ? 8 : 1};
    auto cost = [&](const Mesh& m) {
      const auto rho0 = DensityField::from_function(m, [](std::span<const double> u) {
        return 0.5 + 0.3 * u[0] + 0.2 * std::sin(M_PI * (u[0] + 1.0) / 2.0);
      });
      const auto sol = pde::solve_parabolic(rho0, b, a, 0.5, 0.5 * pde::cfl_bound(m, a));
      return func::rate_functional_IT(sol.trajectory, b, a, fopt).report.IT;
    };
    out.push_back(at_most("IT of solutions under refinement (fine/coarse)", cost(fine) / cost(coarse), 0.5));
  }

  // Time structure.
  {
    Rng rng(RngSpec{c.seed, stream++});
    const auto traj = func::random_trajectory(mesh, 32, 1.0, rng);
    const auto whole = func::rate_functional_IT(traj, b, a, fopt).report;
    const double first = func::rate_functional_IT(traj.slice(0, 16), b, a, fopt).report.IT;
    const double second = func::rate_functional_IT(traj.slice(16, 32), b, a, fopt).report.IT;
    // The cut frame switches from a centred to a one-sided time derivative.
    const double cutScale = 2.0 * traj.dt * *std::max_element(whole.perSlice.begin(), whole.perSlice.end());
    out.push_back(at_most("time additivity (gap / 2 dt max slice)", std::abs(first + second - whole.IT) / cutScale, 1.0));

    DensityField away = rhoBar;
    for (int n = 0; n < mesh.node_count(); ++n) away[n] = std::clamp(rhoBar[n] + 0.2 * std::cos(M_PI * mesh.center(n)[0] / 2.0), 0.05, 0.95);
    const double one = func::rate_functional_IT(frozen(away, 8, 1.0), b, a, fopt).report.IT;
    const double two = func::rate_functional_IT(frozen(away, 16, 2.0), b, a, fopt).report.IT;
    out.push_back(at_most("linear growth away from equilibrium (|IT(2T)/IT(T) - 2|)", std::abs(two / one - 2.0), 1e-8));
  }

  // Reversal bound, free energy, continuity and selection.
  {
    Rng rng(RngSpec{c.seed, stream++});
    double worst = -std::numeric_limits<double>::infinity();
    double minEntropy = std::numeric_limits<double>::infinity();
    const double c0 = pde::max_phi_prime(a);
    const double dt = 0.25 * cfl;
    const int steps = static_cast<int>(std::ceil(0.5 / dt));
    const auto interior = clamp_field(rhoBar, 1e-6, 1.0 - 1e-6);
    for (int draw = 0; draw < kFieldDraws; ++draw) {
      const auto f = qp::random_density_field(mesh, rng);
      const auto sol = pde::solve_parabolic(f, b, a, steps * dt, dt);
      const double it = func::rate_functional_IT(sol.trajectory.reversed(), b, a, fopt).report.IT;
      const double et = func::dissipation_ET(sol.trajectory, b);
      worst = std::max(worst, it / (c0 * et) - 1.0);
      minEntropy = std::min(minEntropy, func::relative_free_energy(f, interior));
    }
    out.push_back(at_most("reversal bound (IT / (C0 ET) - 1)", worst, 1e-8));
    out.push_back(at_most("relative free energy nonnegativity (-min)", -minEntropy, 0.0));

    qp::InterpolationOptions io;
    io.jobs = jobs;
    auto value = [&](double eps) {
      DensityField rho = rhoBar;
      for (int n = 0; n < mesh.node_count(); ++n) {
        const double u = mesh.center(n)[0];
        rho[n] = std::clamp(rhoBar[n] + eps * std::sin(M_PI * (u + 1.0) / 2.0), 0.0, 1.0);
      }
      return qp::quasipotential_upper_interpolation(rho, b, a, qp::ScheduleFamily::Power, io).value;
    };
    const double v1 = value(0.1), v2 = value(0.05);
    out.push_back(at_most("continuity at the stationary profile (V(e/2)/V(e))", v2 / v1, 0.35));

    qp::ReversalOptions ro;
    ro.jobs = jobs;
    ro.residual = io;
    const auto rho = qp::random_density_field(mesh, rng);
    const auto x = qp::quasipotential_upper_interpolation(rho, b, a, qp::ScheduleFamily::Power, io);
    const auto y = qp::quasipotential_upper_reversal(rho, b, a, ro);
    out.push_back(at_most("best-of selects the minimum", qp::best_of(x, y).value - std::min(x.value, y.value), 0.0));
  }

  // Mobility and compressibility.
  {
    double gap = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const double r = k / 1000.0;
      gap = std::max(gap, std::abs(pde::sigma(r, a) - 2.0 * pde::chi(r) * pde::phi_prime(r, a)));
    }
    out.push_back(at_most("Einstein relation sigma = 2 chi phi'", gap, 1e-14));
  }
  return out;
}

}  // namespace bdex::cli

#include "experiments.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>

#include "bdex/functionals.hpp"
#include "bdex/kmc.hpp"
#include "bdex/oracle.hpp"
#include "bdex/parallel.hpp"
#include "bdex/quasipotential.hpp"
#include "streams.hpp"

namespace bdex::cli {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

void log_line(const RunContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n';
}

// Centre of cell c of an EmpiricalProfile, first coordinate slowest.
std::vector<double> cell_center(int dim, int cells, int c) {
  std::vector<double> u(dim);
  for (int j = dim - 1; j >= 1; --j) {
    u[j] = (c % cells + 0.5) / cells;
    c /= cells;
  }
  u[0] = -1.0 + (c + 0.5) * 2.0 / cells;
  return u;
}

std::string coord_header(int dim) {
  std::string h;
  for (int j = 1; j <= dim; ++j) h += fmt::format(",u{}", j);
  return h;
}

std::string coord_values(const std::vector<double>& u) {
  std::string s;
  for (double v : u) s += fmt::format(",{:.17g}", v);
  return s;
}

double zscore(double diff, double se) {
  if (se > 0.0) return diff / se;
  return diff == 0.0 ? 0.0 : std::copysign(1e300, diff);
}

RunResult run_hydrostatics(const ExperimentConfig& c, const RunContext& ctx) {
  const LatticeGeometry geom(c.model());
  const auto b = c.boundary();
  StationaryOptions opt;
  opt.burnIn = c.burnIn;
  opt.samples = c.samples;
  opt.spacing = c.spacing;
  opt.cells = c.cells;
  opt.batches = c.batches;
  std::vector<StationaryProfile> reps(c.replicas);
  parallel_for(c.replicas, ctx.jobs, [&](int, int r) {
    reps[r] = stationary_profile_experiment(geom, b, opt, RngSpec{c.seed, static_cast<std::uint64_t>(r)});
  });
  const auto merged = merge_replicas(reps);
  const auto rhoBar = pde::solve_elliptic(b, c.a, c.mesh());
  const auto target = binned_density(geom, pde::interpolant(rhoBar, b), c.cells);

  std::string csv = "cell" + coord_header(c.d) + ",mean,se,elliptic,z\n";
  double maxZ = 0.0, l1 = 0.0;
  int within = 0;
  const int count = static_cast<int>(merged.mean.values.size());
  for (int k = 0; k < count; ++k) {
    const double diff = merged.mean.values[k] - target.values[k];
    const double z = zscore(diff, merged.standardError[k]);
    maxZ = std::max(maxZ, std::abs(z));
    within += std::abs(z) <= 3.0;
    l1 += std::abs(diff) * merged.mean.cell_volume();
    csv += fmt::format("{}{},{:.17g},{:.17g},{:.17g},{:.17g}\n", k, coord_values(cell_center(c.d, c.cells, k)),
                       merged.mean.values[k], merged.standardError[k], target.values[k], z);
  }
  write_text(ctx.out / "profile.csv", csv);
  json summary{{"sites", geom.site_count()},
               {"cells", count},
               {"batches", merged.batches},
               {"events", merged.events},
               {"simulatedTime", merged.simulatedTime},
               {"maxAbsZ", maxZ},
               {"cellsWithin3SE", within},
               {"l1Distance", l1},
               {"ellipticMesh", pde::mesh_json(c.mesh())}};
  write_json(ctx.out / "hydrostatics.json", summary);
  log_line(ctx, fmt::format("hydrostatics: {} of {} cells within 3 SE, max |z| = {:.3g}, L1 = {:.4g}", within, count,
                            maxZ, l1));
  return {{"profile.csv", "hydrostatics.json"}, summary};
}

RunResult run_hydrodynamics(const ExperimentConfig& c, const RunContext& ctx) {
  const LatticeGeometry geom(c.model());
  const auto b = c.boundary();
  const auto rho0 = c.initial_field();
  const auto density = pde::interpolant(rho0, b);

  std::vector<double> times;
  for (int k = 0; k <= c.snapshots; ++k) times.push_back(c.T * k / c.snapshots);

  // PDE frames at the snapshot times.
  const int perSnapshot = static_cast<int>(std::ceil(c.T / (c.snapshots * c.time_step()) - 1e-9));
  const double dt = c.T / (static_cast<double>(perSnapshot) * c.snapshots);
  pde::ParabolicStepper stepper(rho0, b, c.a, dt);
  std::vector<pde::DensityField> pdeFrames{rho0};
  for (int k = 1; k <= c.snapshots; ++k) {
    for (int s = 0; s < perSnapshot; ++s) stepper.step();
    pdeFrames.push_back(stepper.state());
  }

  // Particle replicas started from product measures with density rho0.
  std::vector<std::vector<EmpiricalProfile>> profiles(c.replicas);
  std::vector<std::uint64_t> events(c.replicas);
  parallel_for(c.replicas, ctx.jobs, [&](int, int r) {
    Rng sampler(RngSpec{c.seed, kSamplingStreamBase + static_cast<std::uint64_t>(r)});
    Configuration eta0 = Configuration::empty(geom);
    for (Site s = 0; s < geom.site_count(); ++s) {
      const auto x = geom.coords(s);
      std::vector<double> u(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) u[j] = static_cast<double>(x[j]) / c.N;
      if (sampler.uniform() < density(u)) eta0.set(s, 1);
    }
    Observer obs{times, [&, r](double, Configuration eta) {
                   profiles[r].push_back(empirical_profile(geom, eta, c.cells));
                 }};
    const auto res = simulate(geom, b, eta0, c.T, RngSpec{c.seed, static_cast<std::uint64_t>(r)}, {&obs, 1});
    events[r] = res.events;
  });

  std::string csv = "time,cell" + coord_header(c.d) + ",mean,se,pde\n";
  json l1s = json::array();
  double maxL1 = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto target = binned_density(geom, pde::interpolant(pdeFrames[k], b), c.cells);
    const int count = static_cast<int>(target.values.size());
    double l1 = 0.0;
    for (int cell = 0; cell < count; ++cell) {
      double mean = 0.0;
      for (int r = 0; r < c.replicas; ++r) mean += profiles[r][k].values[cell] / c.replicas;
      double ss = 0.0;
      for (int r = 0; r < c.replicas; ++r) ss += std::pow(profiles[r][k].values[cell] - mean, 2);
      const double se = c.replicas > 1 ? std::sqrt(ss / (c.replicas - 1) / c.replicas) : 0.0;
      l1 += std::abs(mean - target.values[cell]) * target.cell_volume();
      csv += fmt::format("{:.17g},{}{},{:.17g},{:.17g},{:.17g}\n", times[k], cell,
                         coord_values(cell_center(c.d, c.cells, cell)), mean, se, target.values[cell]);
    }
    l1s.push_back(l1);
    maxL1 = std::max(maxL1, l1);
  }
  write_text(ctx.out / "hydrodynamics.csv", csv);
  std::uint64_t totalEvents = 0;
  for (auto e : events) totalEvents += e;
  json summary{{"times", times},      {"l1Distance", l1s}, {"maxL1Distance", maxL1},
               {"replicas", c.replicas}, {"events", totalEvents}, {"pdeStep", dt},
               {"clipMass", stepper.clip_mass()}};
  write_json(ctx.out / "hydrodynamics.json", summary);
  log_line(ctx, fmt::format("hydrodynamics: max L1 distance to the PDE over {} snapshots = {:.4g}", times.size(), maxL1));
  return {{"hydrodynamics.csv", "hydrodynamics.json"}, summary};
}

RunResult run_rate_functional(const ExperimentConfig& c, const RunContext& ctx) {
  const auto b = c.boundary();
  const auto sol = pde::solve_parabolic(c.initial_field(), b, c.a, c.T, c.time_step());
  pde::Trajectory traj = sol.trajectory;
  if (c.perturbation > 0.0) {
    // Vanishes at t = 0 and t = T and on the faces.
    for (int k = 0; k < traj.frame_count(); ++k) {
      const double tw = std::sin(M_PI * traj.time(k) / traj.horizon());
      for (int n = 0; n < traj.mesh.node_count(); ++n) {
        const double u = traj.mesh.center(n)[0];
        const double v = traj.frames[k][n] + c.perturbation * tw * std::sin(c.mode * M_PI * (u + 1.0) / 2.0);
        traj.frames[k][n] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  func::FunctionalOptions opt;
  opt.jobs = ctx.jobs;
  const auto res = func::rate_functional_IT(traj, b, c.a, opt);
  std::ostringstream slices, frames;
  func::write_slices_csv(slices, res.report, traj.dt);
  pde::write_trajectory_csv(frames, traj, c.saveEvery);
  write_text(ctx.out / "slices.csv", slices.str());
  write_text(ctx.out / "trajectory.csv", frames.str());
  json summary{{"trajectory", pde::trajectory_header(traj, c.a)},
               {"perturbation", c.perturbation},
               {"clipMass", sol.clipMass},
               {"report", res.report.to_json()}};
  write_json(ctx.out / "functional.json", summary);
  log_line(ctx, fmt::format("rate functional: IT = {:.6g}, QT = {:.6g}, ET = {:.6g} over {} frames", res.report.IT,
                            res.report.QT, res.report.ET, traj.frame_count()));
  return {{"slices.csv", "trajectory.csv", "functional.json"}, summary};
}

RunResult run_quasipotential(const ExperimentConfig& c, const RunContext& ctx) {
  const auto b = c.boundary();
  const auto rho = c.initial_field();
  qp::InterpolationOptions io;
  io.frames = c.frames;
  io.jobs = ctx.jobs;
  qp::ReversalOptions ro;
  ro.T = c.qpT;
  ro.tolerance = c.tolerance;
  ro.maxT = c.maxT;
  ro.cflFraction = c.qpCflFraction;
  ro.residual = io;
  ro.jobs = ctx.jobs;
  const auto family = c.family == "cubic" ? qp::ScheduleFamily::Cubic : qp::ScheduleFamily::Power;

  json summary;
  qp::QuasiPotentialEstimate chosen;
  double horizon = 1.0;  // time span of the chosen path
  if (c.method != "reversal") {
    chosen = qp::quasipotential_upper_interpolation(rho, b, c.a, family, io);
    summary["interpolation"] = chosen.to_json();
  }
  if (c.method != "interpolation") {
    const auto rev = qp::quasipotential_upper_reversal(rho, b, c.a, ro);
    summary["reversal"] = rev.to_json();
    const bool useReversal = c.method == "reversal" || rev.value < chosen.value;
    if (useReversal) horizon = rev.diagnostics.at("T").get<double>();
    chosen = c.method == "reversal" ? rev : qp::best_of(chosen, rev);
  }
  const auto sliceCount = static_cast<double>(chosen.pathCost.perSlice.size());
  const double sliceDt = sliceCount > 1 ? horizon / (sliceCount - 1) : 0.0;
  summary["estimate"] = {{"value", chosen.value}, {"method", qp::to_string(chosen.method)}};
  std::vector<std::string> outputs{"quasipotential.json", "slices.csv"};
  std::ostringstream slices;
  func::write_slices_csv(slices, chosen.pathCost, sliceDt);
  write_text(ctx.out / "slices.csv", slices.str());
  log_line(ctx, fmt::format("quasi-potential upper bound ({}): {:.6g}", qp::to_string(chosen.method), chosen.value));

  if (c.sweep > 0) {
    const auto report = qp::boundedness_sweep(b, c.a, c.mesh(), c.sweep, RngSpec{c.seed, kSweepStreamBase}, ro);
    std::string csv = "sample,label,estimate\n";
    for (std::size_t i = 0; i < report.estimates.size(); ++i) {
      csv += fmt::format("{},{},{:.17g}\n", i, report.labels[i], report.estimates[i]);
    }
    write_text(ctx.out / "boundedness.csv", csv);
    summary["boundedness"] = report.to_json();
    outputs.push_back("boundedness.csv");
    log_line(ctx, fmt::format("boundedness sweep: max {:.6g} at {}, all finite: {}", report.max,
                              report.labels[report.argmax], report.allFinite));
  }
  write_json(ctx.out / "quasipotential.json", summary);
  return {outputs, summary};
}

RunResult run_oracle_validate(const ExperimentConfig& c, const RunContext& ctx) {
  const auto params = c.model();
  const LatticeGeometry geom(params);
  const auto b = c.boundary();
  const auto L = oracle::build_generator(params, b);
  const auto fromEvents = oracle::generator_from_events(geom, b);
  const double constructionGap = (L - fromEvents).cwiseAbs().maxCoeff();

  const Reservoirs res(geom, b);
  const double scale = static_cast<double>(c.N) * c.N;
  double exitGap = 0.0;
  for (Eigen::Index s = 0; s < L.rows(); ++s) {
    const auto events = enumerate_events(geom, res, Configuration::from_code(geom.site_count(), s));
    exitGap = std::max(exitGap, std::abs(scale * exit_rate(events) + L(s, s)) / std::abs(L(s, s)));
  }

  const auto mu = oracle::stationary_vector(L);
  const double residual = (mu.transpose() * L).cwiseAbs().maxCoeff() / L.cwiseAbs().maxCoeff();
  const auto fractions = state_time_fractions(geom, b, Configuration::empty(geom), c.burnIn,
                                              static_cast<std::uint64_t>(c.events), RngSpec{c.seed, 0});
  const Eigen::Map<const Eigen::VectorXd> empirical(fractions.data(), L.rows());
  const double tv = oracle::total_variation(empirical, mu);

  const auto law = oracle::transient_law(L, 0, c.transientTime);
  const auto counts = final_state_counts(geom, b, Configuration::empty(geom), c.transientTime, c.transientReplicas,
                                         RngSpec{c.seed, kTransientStreamBase}, ctx.jobs);
  const auto chi2 = oracle::chi_square_test(law, counts);

  std::string stationary = "state,exact,kmc\n";
  std::string transient = "state,exact,kmc\n";
  for (Eigen::Index s = 0; s < L.rows(); ++s) {
    stationary += fmt::format("{},{:.17g},{:.17g}\n", s, mu(s), fractions[s]);
    transient += fmt::format("{},{:.17g},{:.17g}\n", s, law(s),
                             static_cast<double>(counts[s]) / static_cast<double>(c.transientReplicas));
  }
  write_text(ctx.out / "stationary.csv", stationary);
  write_text(ctx.out / "transient.csv", transient);
  json summary{{"states", L.rows()},
               {"generatorConstructionGap", constructionGap},
               {"maxExitRateMismatch", exitGap},
               {"stationaryResidual", residual},
               {"stationaryTV", tv},
               {"events", c.events},
               {"transient", {{"time", c.transientTime},
                              {"replicas", c.transientReplicas},
                              {"chi2", chi2.statistic},
                              {"dof", chi2.dof},
                              {"pvalue", chi2.pvalue}}}};
  write_json(ctx.out / "oracle.json", summary);
  log_line(ctx, fmt::format("oracle: {} states, TV = {:.4g}, transient chi2 p = {:.4g}, constructions differ by {:.3g}",
                            L.rows(), tv, chi2.pvalue, constructionGap));
  return {{"stationary.csv", "transient.csv", "oracle.json"}, summary};
}

RunResult run_lemma_suite(const ExperimentConfig& c, const RunContext& ctx) {
  const auto checks = lemma_suite(c, ctx.jobs);
  std::string csv = "check,value,requirement,pass\n";
  json rows = json::array();
  int passed = 0;
  for (const auto& k : checks) {
    csv += fmt::format("{},{:.17g},{},{}\n", k.name, k.value, k.requirement, k.pass ? "PASS" : "FAIL");
    rows.push_back({{"check", k.name}, {"value", k.value}, {"requirement", k.requirement}, {"pass", k.pass}});
    passed += k.pass;
    log_line(ctx, fmt::format("{:<4} {:<44} {:>12.4g}  {}", k.pass ? "PASS" : "FAIL", k.name, k.value, k.requirement));
  }
  write_text(ctx.out / "lemma_suite.csv", csv);
  json summary{{"checks", rows}, {"passed", passed}, {"total", checks.size()}, {"allPass", passed == static_cast<int>(checks.size())}};
  write_json(ctx.out / "lemma_suite.json", summary);
  log_line(ctx, fmt::format("lemma suite: {} of {} checks pass", passed, checks.size()));
  return {{"lemma_suite.csv", "lemma_suite.json"}, summary};
}

}  // namespace

json manifest_json(const ExperimentConfig& config, const RunResult& result) {
  return {{"program", "bdex"},
          {"version", BDEX_VERSION},
          {"libraries",
           {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"boost", fmt::format("{}.{}.{}", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100)},
            {"fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100)},
            {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                          NLOHMANN_JSON_VERSION_PATCH)}}},
          {"seed", config.seed},
          {"streams",
           {{"replica", "r"},
            {"initialDensity", kInitialStreamBase},
            {"initialConfigurations", kSamplingStreamBase},
            {"boundednessSweep", kSweepStreamBase},
            {"transientReplicas", kTransientStreamBase},
            {"lemmaSuite", kSuiteStreamBase}}},
          {"config", config_to_json(config)},
          {"outputs", result.outputs},
          {"summary", result.summary}};
}

RunResult run_experiment(const ExperimentConfig& config, const RunContext& ctx) {
  if (config.kind == "hydrostatics") return run_hydrostatics(config, ctx);
  if (config.kind == "hydrodynamics") return run_hydrodynamics(config, ctx);
  if (config.kind == "rate-functional") return run_rate_functional(config, ctx);
  if (config.kind == "quasipotential") return run_quasipotential(config, ctx);
  if (config.kind == "oracle-validate") return run_oracle_validate(config, ctx);
  if (config.kind == "lemma-suite") return run_lemma_suite(config, ctx);
  throw std::invalid_argument("unknown experiment kind '" + config.kind + "'");
}

}  // namespace bdex::cli

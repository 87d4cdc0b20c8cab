#include "bdex/quasipotential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "bdex/parallel.hpp"

namespace bdex::qp {

namespace {

constexpr double kInvPhi = 0.6180339887498949;

// 4-point Gauss-Legendre on [0,1]; exact for the degree-6 integrands used here.
constexpr std::array<double, 4> kGaussNodes = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281,
                                               0.9305681557970263};
constexpr std::array<double, 4> kGaussWeights = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731,
                                                 0.1739274225687269};

template <class F>
std::pair<double, double> golden_minimise(F&& f, double lo, double hi, int iterations) {
  double bestX = lo;
  double bestF = std::numeric_limits<double>::infinity();
  auto eval = [&](double x) {
    const double v = f(x);
    if (v < bestF) {
      bestF = v;
      bestX = x;
    }
    return v;
  };
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = eval(x1);
  double f2 = eval(x2);
  for (int it = 0; it < iterations; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = eval(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = eval(x2);
    }
  }
  return {bestX, bestF};
}

struct BoundaryCheck {
  double mismatch = 0.0;
  double margin = 0.0;  // min(rho, 1 - rho)
};

BoundaryCheck check_boundary(const DensityField& rho, const BoundaryProfile& b) {
  const Mesh& mesh = rho.mesh();
  const auto faces = pde::sample_boundary(mesh, b);
  const int T = mesh.transverse_count();
  BoundaryCheck out;
  // Face values by linear extrapolation from the two nearest cells.
  auto face = [&](int inside, int next) { return mesh.M1 > 1 ? 1.5 * rho[inside] - 0.5 * rho[next] : rho[inside]; };
  for (int t = 0; t < T; ++t) {
    const int last = (mesh.M1 - 1) * T + t;
    out.mismatch = std::max(out.mismatch, std::abs(face(t, t + T) - faces.left[t]));
    out.mismatch = std::max(out.mismatch, std::abs(face(last, last - T) - faces.right[t]));
  }
  out.margin = std::min(rho.min(), 1.0 - rho.max());
  return out;
}

}  // namespace

InterpolationSchedule InterpolationSchedule::power(double p) {
  if (!(p > 0.5)) throw DomainError("power schedule needs p > 1/2");
  InterpolationSchedule s;
  s.p_ = p;
  return s;
}

InterpolationSchedule InterpolationSchedule::cubic(std::vector<double> knots) {
  const int n = static_cast<int>(knots.size());
  if (n < 2) throw DomainError("cubic schedule needs at least two knots");
  if (knots.front() != 0.0 || knots.back() != 1.0) throw DomainError("cubic schedule must run from 0 to 1");
  for (int k = 1; k < n; ++k) {
    if (!(knots[k] > knots[k - 1])) throw DomainError("cubic schedule knots must increase");
  }
  InterpolationSchedule s;
  const double h = 1.0 / (n - 1);
  std::vector<double> secant(n - 1);
  for (int k = 0; k + 1 < n; ++k) secant[k] = (knots[k + 1] - knots[k]) / h;
  // Fritsch-Carlson slopes: harmonic means inside, shape-preserving ends.
  s.slopes_.assign(n, 0.0);
  if (n == 2) {
    s.slopes_ = {secant[0], secant[0]};
  } else {
    for (int k = 1; k + 1 < n; ++k) s.slopes_[k] = 2.0 / (1.0 / secant[k - 1] + 1.0 / secant[k]);
    auto end_slope = [](double d0, double d1) {
      double m = 0.5 * (3.0 * d0 - d1);
      if (m <= 0.0) return 0.0;
      return std::min(m, 3.0 * d0);
    };
    s.slopes_[0] = end_slope(secant[0], secant[1]);
    s.slopes_[n - 1] = end_slope(secant[n - 2], secant[n - 3]);
  }
  s.knots_ = std::move(knots);
  return s;
}

void InterpolationSchedule::hermite(double t, double& value, double& slope) const {
  const int n = static_cast<int>(knots_.size());
  const double h = 1.0 / (n - 1);
  const int k = std::clamp(static_cast<int>(t / h), 0, n - 2);
  const double s = (t - k * h) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double y0 = knots_[k];
  const double y1 = knots_[k + 1];
  const double m0 = slopes_[k] * h;
  const double m1 = slopes_[k + 1] * h;
  value = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1;
  slope = ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * m1) / h;
}

double InterpolationSchedule::alpha(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  if (is_power()) return std::pow(t, p_);
  double v, d;
  hermite(t, v, d);
  return std::clamp(v, 0.0, 1.0);
}

double InterpolationSchedule::derivative(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  if (is_power()) return t > 0.0 ? p_ * std::pow(t, p_ - 1.0) : (p_ < 1.0 ? INFINITY : (p_ == 1.0 ? 1.0 : 0.0));
  double v, d;
  hermite(t, v, d);
  return d;
}

double InterpolationSchedule::integral_alpha_squared() const {
  if (is_power()) return 1.0 / (2.0 * p_ + 1.0);
  const int n = static_cast<int>(knots_.size());
  const double h = 1.0 / (n - 1);
  double s = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    for (int q = 0; q < 4; ++q) {
      const double a = alpha((k + kGaussNodes[q]) * h);
      s += kGaussWeights[q] * h * a * a;
    }
  }
  return s;
}

double InterpolationSchedule::integral_derivative_squared() const {
  if (is_power()) return p_ * p_ / (2.0 * p_ - 1.0);
  const int n = static_cast<int>(knots_.size());
  const double h = 1.0 / (n - 1);
  double s = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    for (int q = 0; q < 4; ++q) {
      const double d = derivative((k + kGaussNodes[q]) * h);
      s += kGaussWeights[q] * h * d * d;
    }
  }
  return s;
}

nlohmann::json InterpolationSchedule::to_json() const {
  nlohmann::json j;
  if (is_power()) {
    j["family"] = "power";
    j["p"] = p_;
  } else {
    j["family"] = "cubic";
    j["knots"] = knots_;
  }
  j["intAlphaSquared"] = integral_alpha_squared();
  j["intDerivativeSquared"] = integral_derivative_squared();
  return j;
}

std::string to_string(ScheduleFamily family) { return family == ScheduleFamily::Power ? "power" : "cubic"; }

std::string to_string(EstimateMethod method) {
  switch (method) {
    case EstimateMethod::Interpolation:
      return "interpolation";
    case EstimateMethod::Reversal:
      return "reversal";
    case EstimateMethod::BestOf:
      return "best-of";
  }
  return "unknown";
}

nlohmann::json QuasiPotentialEstimate::to_json() const {
  return {{"value", value}, {"method", to_string(method)}, {"pathCost", pathCost.to_json()}, {"diagnostics", diagnostics}};
}

Trajectory interpolation_path(const DensityField& rho, const DensityField& rhoBar,
                              const InterpolationSchedule& schedule, int frames) {
  if (!(rho.mesh() == rhoBar.mesh())) throw func::GridMismatch("interpolation endpoints live on different meshes");
  if (frames < 1) throw DomainError("interpolation path needs at least one interval");
  const Mesh& mesh = rho.mesh();
  Trajectory out{mesh, 1.0 / frames, {}};
  for (int k = 0; k <= frames; ++k) {
    const double s = k == frames ? 1.0 : schedule.alpha(static_cast<double>(k) / frames);
    std::vector<double> v(mesh.node_count());
    for (int n = 0; n < mesh.node_count(); ++n) v[n] = std::clamp((1.0 - s) * rhoBar[n] + s * rho[n], 0.0, 1.0);
    out.frames.push_back(std::move(v));
  }
  return out;
}

QuasiPotentialEstimate quasipotential_upper_interpolation(const DensityField& rho, const BoundaryProfile& b,
                                                          double a, ScheduleFamily family,
                                                          const InterpolationOptions& options) {
  const DensityField rhoBar = pde::solve_elliptic(b, a, rho.mesh());
  func::FunctionalOptions fopt;
  fopt.jobs = options.jobs;
  auto cost = [&](const InterpolationSchedule& s) {
    return func::rate_functional_IT(interpolation_path(rho, rhoBar, s, options.frames), b, a, fopt).report.IT;
  };

  auto [bestP, bestCost] = golden_minimise([&](double p) { return cost(InterpolationSchedule::power(p)); },
                                           options.pMin, options.pMax, options.goldenIterations);
  InterpolationSchedule best = InterpolationSchedule::power(bestP);

  if (family == ScheduleFamily::Cubic && options.cubicKnots >= 3) {
    const int n = options.cubicKnots;
    std::vector<double> knots(n);
    for (int k = 0; k < n; ++k) knots[k] = std::pow(static_cast<double>(k) / (n - 1), bestP);
    for (int sweep = 0; sweep < options.cubicSweeps; ++sweep) {
      for (int k = 1; k + 1 < n; ++k) {
        const double gap = 1e-6 * (knots[k + 1] - knots[k - 1]);
        auto trial = [&](double y) {
          auto candidate = knots;
          candidate[k] = y;
          return cost(InterpolationSchedule::cubic(candidate));
        };
        auto [y, c] = golden_minimise(trial, knots[k - 1] + gap, knots[k + 1] - gap, options.lineIterations);
        if (c < bestCost) {
          bestCost = c;
          knots[k] = y;
          best = InterpolationSchedule::cubic(knots);
        }
      }
    }
  }

  const auto path = interpolation_path(rho, rhoBar, best, options.frames);
  QuasiPotentialEstimate out;
  out.method = EstimateMethod::Interpolation;
  out.pathCost = func::rate_functional_IT(path, b, a, fopt).report;
  out.value = out.pathCost.IT;
  const BoundaryCheck bc = check_boundary(rho, b);
  out.diagnostics = {{"family", to_string(family)},
                     {"schedule", best.to_json()},
                     {"frames", options.frames},
                     {"mesh", pde::mesh_json(rho.mesh())},
                     {"distanceToStationary", pde::l2_distance(rho, rhoBar)},
                     {"boundaryMismatch", bc.mismatch},
                     {"boundaryConditionFlag", bc.mismatch > options.faceTolerance},
                     {"densityMargin", bc.margin}};
  return out;
}

QuasiPotentialEstimate quasipotential_upper_reversal(const DensityField& rho, const BoundaryProfile& b, double a,
                                                     const ReversalOptions& options) {
  const Mesh& mesh = rho.mesh();
  if (options.frameCap < 2) throw DomainError("frame cap must be >= 2");
  if (!(options.cflFraction > 0.0 && options.cflFraction <= 1.0)) throw DomainError("cflFraction must lie in (0,1]");
  const DensityField rhoBar = pde::solve_elliptic(b, a, mesh);
  double dt = options.cflFraction * pde::cfl_bound(mesh, a);
  long fixedSteps = -1;
  if (options.T > 0.0) {
    fixedSteps = static_cast<long>(std::ceil(options.T / dt - 1e-9));
    dt = options.T / fixedSteps;
  } else if (!(options.maxT > 0.0)) {
    throw DomainError("adaptive relaxation needs maxT > 0");
  }
  const long maxSteps = fixedSteps > 0 ? fixedSteps : static_cast<long>(std::ceil(options.maxT / dt));

  pde::ParabolicStepper stepper(rho, b, a, dt);
  std::vector<std::vector<double>> frames{{rho.values().begin(), rho.values().end()}};
  long stride = 1;
  long steps = 0;
  auto record = [&]() {
    if (steps % stride != 0) return;
    const auto v = stepper.state().values();
    frames.emplace_back(v.begin(), v.end());
    if (static_cast<int>(frames.size()) > options.frameCap) {
      // Keep every other frame; the survivors sit at multiples of the doubled stride.
      std::vector<std::vector<double>> kept;
      for (std::size_t k = 0; k < frames.size(); k += 2) kept.push_back(std::move(frames[k]));
      frames = std::move(kept);
      stride *= 2;
    }
  };
  double distance = pde::l2_distance(rho, rhoBar);
  const bool adaptive = fixedSteps < 0;
  while (steps < maxSteps && !(adaptive && distance < options.tolerance)) {
    stepper.step();
    ++steps;
    record();
    distance = pde::l2_distance(stepper.state(), rhoBar);
  }
  // Finish on a stored frame.
  while (steps % stride != 0) {
    stepper.step();
    ++steps;
    record();
  }
  distance = pde::l2_distance(stepper.state(), rhoBar);

  Trajectory relaxation{mesh, dt * stride, std::move(frames)};
  if (relaxation.frame_count() == 1) relaxation.dt = 0.0;
  func::FunctionalOptions fopt;
  fopt.jobs = options.jobs;
  const double relaxationET = func::dissipation_ET(relaxation, b);
  const auto reversal = func::rate_functional_IT(relaxation.reversed(), b, a, fopt).report;

  const DensityField endpoint = relaxation.field(relaxation.frame_count() - 1);
  InterpolationOptions ropt = options.residual;
  ropt.jobs = options.jobs;
  const auto residual = quasipotential_upper_interpolation(endpoint, b, a, ScheduleFamily::Power, ropt);

  QuasiPotentialEstimate out;
  out.method = EstimateMethod::Reversal;
  out.pathCost = reversal;
  out.value = reversal.IT + residual.value;
  const double c0 = pde::max_phi_prime(a);
  out.diagnostics = {{"T", relaxation.horizon()},
                     {"adaptive", adaptive},
                     {"steps", steps},
                     {"stepSize", dt},
                     {"frameStride", stride},
                     {"frames", relaxation.frame_count()},
                     {"finalDistance", distance},
                     {"reachedTolerance", distance < options.tolerance},
                     {"relaxationET", relaxationET},
                     {"reversalIT", reversal.IT},
                     {"C0", c0},
                     {"reversalBoundHolds", reversal.IT <= c0 * relaxationET * (1.0 + 1e-8) + 1e-12},
                     {"residualCost", residual.value},
                     {"residualSchedule", residual.diagnostics["schedule"]},
                     {"clipMass", stepper.clip_mass()},
                     {"mesh", pde::mesh_json(mesh)}};
  return out;
}

QuasiPotentialEstimate best_of(const QuasiPotentialEstimate& x, const QuasiPotentialEstimate& y) {
  QuasiPotentialEstimate out = x.value <= y.value ? x : y;
  out.diagnostics = {{"chosen", to_string(out.method)},
                     {"candidates", {x.value, y.value}},
                     {"chosenDiagnostics", out.diagnostics}};
  out.method = EstimateMethod::BestOf;
  return out;
}

DensityField random_density_field(const Mesh& mesh, Rng& rng) {
  std::vector<double> v(mesh.node_count());
  if (rng.uniform() < 0.5) {
    // Low Fourier modes around a random level, clipped into [0,1].
    const double level = rng.uniform();
    const double amplitude = 0.6 * rng.uniform();
    std::array<double, 4> c1{}, c2{};
    for (int m = 0; m < 4; ++m) {
      c1[m] = rng.normal() / (m + 1);
      c2[m] = rng.normal() / (m + 1);
    }
    for (int n = 0; n < mesh.node_count(); ++n) {
      const auto u = mesh.center(n);
      double s = level;
      for (int m = 0; m < 4; ++m) {
        s += amplitude * c1[m] * std::sin(M_PI * (m + 1) * (u[0] + 1.0) / 2.0);
        if (mesh.d > 1) s += amplitude * c2[m] * std::cos(2.0 * M_PI * (m + 1) * u[1]);
      }
      v[n] = std::clamp(s, 0.0, 1.0);
    }
  } else {
    // Piecewise constant in u1 on a few random blocks, values often 0 or 1.
    const int blocks = 1 + static_cast<int>(rng.below(6));
    std::vector<double> level(blocks);
    for (double& l : level) {
      const double r = rng.uniform();
      l = r < 0.3 ? 0.0 : (r < 0.6 ? 1.0 : rng.uniform());
    }
    for (int n = 0; n < mesh.node_count(); ++n) {
      const int block = std::min(blocks - 1, mesh.first_index(n) * blocks / mesh.M1);
      v[n] = level[block];
    }
  }
  return DensityField(mesh, std::move(v));
}

double BoundednessReport::quantile(double q) const {
  if (estimates.empty()) return 0.0;
  auto sorted = estimates;
  std::sort(sorted.begin(), sorted.end());
  const double pos = std::clamp(q, 0.0, 1.0) * (sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

nlohmann::json BoundednessReport::to_json() const {
  return {{"samples", estimates.size()},
          {"max", max},
          {"argmax", argmax},
          {"argmaxLabel", argmax >= 0 ? labels[argmax] : std::string()},
          {"allFinite", allFinite},
          {"median", quantile(0.5)},
          {"q90", quantile(0.9)}};
}

BoundednessReport boundedness_sweep(const BoundaryProfile& b, double a, const Mesh& mesh, int sampleCount,
                                    const RngSpec& rng, const ReversalOptions& options) {
  if (sampleCount < 1) throw DomainError("sample count must be >= 1");
  BoundednessReport out;
  out.labels.resize(sampleCount);
  out.estimates.assign(sampleCount, 0.0);
  const DensityField rhoBar = pde::solve_elliptic(b, a, mesh);
  ReversalOptions inner = options;
  inner.jobs = 1;
  parallel_for(sampleCount, options.jobs, [&](int, int i) {
    DensityField rho = rhoBar;
    if (i == 0) {
      rho = DensityField::constant(mesh, 0.0);
      out.labels[i] = "zero";
    } else if (i == 1) {
      rho = DensityField::constant(mesh, 1.0);
      out.labels[i] = "one";
    } else if (i == 2) {
      out.labels[i] = "stationary";
    } else {
      Rng gen(RngSpec{rng.seed, rng.streamId + static_cast<std::uint64_t>(i)});
      rho = random_density_field(mesh, gen);
      out.labels[i] = fmt::format("random-{}", i);
    }
    out.estimates[i] = quasipotential_upper_reversal(rho, b, a, inner).value;
  });
  for (int i = 0; i < sampleCount; ++i) {
    if (!std::isfinite(out.estimates[i])) out.allFinite = false;
    if (out.argmax < 0 || out.estimates[i] > out.max) {
      out.max = out.estimates[i];
      out.argmax = i;
    }
  }
  return out;
}

}  // namespace bdex::qp

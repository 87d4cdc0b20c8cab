#include "bdex/functionals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <ostream>
#include <string>

#include <Eigen/Sparse>
#include <fmt/format.h>

#include "bdex/parallel.hpp"

namespace bdex::func {

using pde::FaceValues;
using pde::MeshFace;

namespace {

double lo_value(const MeshFace& f, std::span<const double> v, const FaceValues& faces) {
  return f.lo < 0 ? faces.left[f.transverse] : v[f.lo];
}

double hi_value(const MeshFace& f, std::span<const double> v, const FaceValues& faces) {
  return f.hi < 0 ? faces.right[f.transverse] : v[f.hi];
}

double face_sigma(const MeshFace& f, std::span<const double> rho, const FaceValues& b, double a, long* clipped) {
  const double m = 0.5 * (lo_value(f, rho, b) + hi_value(f, rho, b));
  const double s = pde::sigma(m, a);
  if (s < kWeightFloor) {
    if (clipped) ++*clipped;
    return kWeightFloor;
  }
  return s;
}

bool same_step(double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(std::abs(x), std::abs(y)); }

void check_trajectory(const Trajectory& traj) {
  traj.mesh.validate();
  if (traj.frames.empty()) throw GridMismatch("trajectory has no frames");
  if (traj.frame_count() > 1 && !(traj.dt > 0.0)) throw GridMismatch("trajectory needs dt > 0");
  for (const auto& f : traj.frames) {
    if (static_cast<int>(f.size()) != traj.mesh.node_count()) throw GridMismatch("frame size does not match mesh");
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// Assembles and factorises sum_f coupling_f sigma_f (e_hi - e_lo)(e_hi - e_lo)^T
// with G = 0 beyond the Dirichlet faces. The sparsity pattern is analysed once.
class WeightedSolver {
 public:
  explicit WeightedSolver(const Mesh& mesh) : faces_(pde::mesh_faces(mesh)), K_(mesh.node_count(), mesh.node_count()) {
    std::vector<Eigen::Triplet<double>> pattern;
    for (const MeshFace& f : faces_) {
      if (f.lo >= 0) pattern.emplace_back(f.lo, f.lo, 1.0);
      if (f.hi >= 0) pattern.emplace_back(f.hi, f.hi, 1.0);
      if (f.lo >= 0 && f.hi >= 0) {
        pattern.emplace_back(f.lo, f.hi, 1.0);
        pattern.emplace_back(f.hi, f.lo, 1.0);
      }
    }
    K_.setFromTriplets(pattern.begin(), pattern.end());
    K_.makeCompressed();
    for (const MeshFace& f : faces_) {
      Slots s{-1, -1, -1, -1};
      if (f.lo >= 0) s.ll = offset(f.lo, f.lo);
      if (f.hi >= 0) s.hh = offset(f.hi, f.hi);
      if (f.lo >= 0 && f.hi >= 0) {
        s.lh = offset(f.lo, f.hi);
        s.hl = offset(f.hi, f.lo);
      }
      slots_.push_back(s);
    }
    solver_.analyzePattern(K_);
  }

  // Returns G with K(sigma) G = rhs and the relative residual.
  std::pair<Eigen::VectorXd, double> solve(std::span<const double> sigmaPerFace, const Eigen::VectorXd& rhs) {
    double* values = K_.valuePtr();
    std::fill(values, values + K_.nonZeros(), 0.0);
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      const double c = faces_[i].coupling() * sigmaPerFace[i];
      const Slots& s = slots_[i];
      if (s.ll >= 0) values[s.ll] += c;
      if (s.hh >= 0) values[s.hh] += c;
      if (s.lh >= 0) values[s.lh] -= c;
      if (s.hl >= 0) values[s.hl] -= c;
    }
    solver_.factorize(K_);
    if (solver_.info() != Eigen::Success) return {Eigen::VectorXd(), -1.0};
    Eigen::VectorXd G = solver_.solve(rhs);
    const double scale = rhs.cwiseAbs().maxCoeff();
    const double residual = scale > 0.0 ? (K_ * G - rhs).cwiseAbs().maxCoeff() / scale : 0.0;
    return {std::move(G), residual};
  }

  const std::vector<MeshFace>& faces() const { return faces_; }

 private:
  struct Slots {
    Eigen::Index ll, hh, lh, hl;
  };

  Eigen::Index offset(int i, int j) { return &K_.coeffRef(i, j) - K_.valuePtr(); }

  std::vector<MeshFace> faces_;
  std::vector<Slots> slots_;
  Eigen::SparseMatrix<double> K_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace

TestField TestField::zero(const Trajectory& traj) {
  return {traj.mesh, traj.dt,
          std::vector<std::vector<double>>(traj.frame_count(), std::vector<double>(traj.mesh.node_count(), 0.0))};
}

TestField TestField::from_function(const Trajectory& traj,
                                   const std::function<double(double, std::span<const double>)>& g) {
  TestField out = zero(traj);
  for (int k = 0; k < traj.frame_count(); ++k) {
    for (int n = 0; n < traj.mesh.node_count(); ++n) out.frames[k][n] = g(traj.time(k), traj.mesh.center(n));
  }
  return out;
}

TestField TestField::scaled(double s) const {
  TestField out = *this;
  for (auto& f : out.frames) {
    for (double& v : f) v *= s;
  }
  return out;
}

nlohmann::json FunctionalReport::to_json() const {
  return {{"QT", QT},
          {"ET", ET},
          {"IT", IT},
          {"slices", perSlice.size()},
          {"maxResidual", maxResidual},
          {"clippedWeights", clippedWeights},
          {"degenerateFrames", degenerateFrames}};
}

std::vector<double> time_weights(int frames, double dt) {
  if (frames <= 1) return std::vector<double>(std::max(frames, 0), 0.0);
  std::vector<double> w(frames, dt);
  w.front() = w.back() = 0.5 * dt;
  return w;
}

std::vector<std::vector<double>> time_derivative(const std::vector<std::vector<double>>& frames, double dt) {
  const int K = static_cast<int>(frames.size()) - 1;
  std::vector<std::vector<double>> out(frames.size());
  if (K < 1) {
    if (K == 0) out[0].assign(frames[0].size(), 0.0);
    return out;
  }
  const std::size_t n = frames[0].size();
  for (int k = 0; k <= K; ++k) {
    out[k].resize(n);
    const int up = std::min(k + 1, K);
    const int down = std::max(k - 1, 0);
    const double span = (up - down) * dt;
    for (std::size_t i = 0; i < n; ++i) out[k][i] = (frames[up][i] - frames[down][i]) / span;
  }
  return out;
}

double energy_QT(const Trajectory& traj, const BoundaryProfile& b) {
  check_trajectory(traj);
  const auto faces = pde::mesh_faces(traj.mesh);
  const FaceValues bf = pde::sample_boundary(traj.mesh, b);
  const auto w = time_weights(traj.frame_count(), traj.dt);
  double total = 0.0;
  for (int k = 0; k < traj.frame_count(); ++k) {
    const auto& rho = traj.frames[k];
    double slice = 0.0;
    for (const MeshFace& f : faces) {
      const double g = (hi_value(f, rho, bf) - lo_value(f, rho, bf)) / f.distance;
      slice += f.volume() * g * g;
    }
    total += w[k] * slice;
  }
  return total;
}

double dissipation_ET(const Trajectory& traj, const BoundaryProfile& b, int* degenerateFrames) {
  check_trajectory(traj);
  const auto faces = pde::mesh_faces(traj.mesh);
  const FaceValues bf = pde::sample_boundary(traj.mesh, b);
  const auto w = time_weights(traj.frame_count(), traj.dt);
  double total = 0.0;
  int degenerate = 0;
  for (int k = 0; k < traj.frame_count(); ++k) {
    const auto& rho = traj.frames[k];
    if (std::any_of(rho.begin(), rho.end(), [](double r) { return r <= 0.0 || r >= 1.0; })) ++degenerate;
    double slice = 0.0;
    for (const MeshFace& f : faces) {
      const double lo = lo_value(f, rho, bf);
      const double hi = hi_value(f, rho, bf);
      const double g = (hi - lo) / f.distance;
      if (g == 0.0) continue;
      slice += f.volume() * g * g / std::max(pde::chi(0.5 * (lo + hi)), kWeightFloor);
    }
    total += w[k] * slice;
  }
  if (degenerateFrames) *degenerateFrames = degenerate;
  return total;
}

double evaluate_JG(const Trajectory& traj, const TestField& G, const BoundaryProfile& b, double a) {
  check_trajectory(traj);
  if (!(G.mesh == traj.mesh) || G.frame_count() != traj.frame_count() ||
      (traj.frame_count() > 1 && !same_step(G.dt, traj.dt))) {
    throw GridMismatch("test field and trajectory live on different grids");
  }
  for (const auto& f : G.frames) {
    if (static_cast<int>(f.size()) != traj.mesh.node_count()) throw GridMismatch("test field frame size");
  }
  const Mesh& mesh = traj.mesh;
  const int K = traj.frame_count() - 1;
  const double vol = mesh.cell_volume();
  const auto faces = pde::mesh_faces(mesh);
  const FaceValues rhoFaces = pde::sample_boundary(mesh, b);
  const auto w = time_weights(traj.frame_count(), traj.dt);
  const auto dG = time_derivative(G.frames, traj.dt);
  const int T = mesh.transverse_count();
  const double halfStep = 0.5 * mesh.h1();
  const double faceArea = std::pow(mesh.ht(), mesh.d - 1);

  double value = vol * (dot(traj.frames[K], G.frames[K]) - dot(traj.frames[0], G.frames[0]));
  std::vector<double> phiRho(mesh.node_count());
  std::vector<double> lapG(mesh.node_count());
  const FaceValues zero = pde::zero_faces(mesh);
  for (int k = 0; k <= K; ++k) {
    const auto& rho = traj.frames[k];
    const auto& g = G.frames[k];
    for (int n = 0; n < mesh.node_count(); ++n) phiRho[n] = pde::phi(rho[n], a);
    pde::laplacian(mesh, g, zero, lapG);

    double slice = -vol * dot(rho, dG[k]) - vol * dot(phiRho, lapG);
    // Surface terms with one-sided normal derivatives of G at u1 = +-1.
    for (int t = 0; t < T; ++t) {
      const double dRight = -g[(mesh.M1 - 1) * T + t] / halfStep;
      const double dLeft = g[t] / halfStep;
      slice += faceArea * (pde::phi(rhoFaces.right[t], a) * dRight - pde::phi(rhoFaces.left[t], a) * dLeft);
    }
    double quad = 0.0;
    for (const MeshFace& f : faces) {
      const double gl = f.lo < 0 ? 0.0 : g[f.lo];
      const double gh = f.hi < 0 ? 0.0 : g[f.hi];
      const double grad = (gh - gl) / f.distance;
      quad += f.volume() * face_sigma(f, rho, rhoFaces, a, nullptr) * grad * grad;
    }
    value += w[k] * (slice - 0.5 * quad);
  }
  return value;
}

RateFunctionalResult rate_functional_IT(const Trajectory& traj, const BoundaryProfile& b, double a,
                                        const FunctionalOptions& options) {
  check_trajectory(traj);
  const Mesh& mesh = traj.mesh;
  const int frames = traj.frame_count();
  const int n = mesh.node_count();
  const double vol = mesh.cell_volume();
  const FaceValues rhoFaces = pde::sample_boundary(mesh, b);
  const auto dRho = time_derivative(traj.frames, traj.dt);

  RateFunctionalResult out;
  FunctionalReport& rep = out.report;
  rep.sliceWeights = time_weights(frames, traj.dt);
  rep.perSlice.assign(frames, 0.0);
  if (options.keepOptimizer) out.optimizer = TestField::zero(traj);

  const int jobs = std::max(1, std::min(options.jobs, frames));
  std::vector<std::unique_ptr<WeightedSolver>> solvers(jobs);
  std::vector<double> residuals(frames, 0.0);
  std::vector<long> clipped(frames, 0);

  parallel_for(frames, jobs, [&](int worker, int k) {
    if (!solvers[worker]) solvers[worker] = std::make_unique<WeightedSolver>(mesh);
    WeightedSolver& solver = *solvers[worker];
    const auto& rho = traj.frames[k];
    const auto lap = pde::phi_laplacian(mesh, rho, rhoFaces, a);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = vol * (dRho[k][i] - lap[i]);
    std::vector<double> sig(solver.faces().size());
    for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = face_sigma(solver.faces()[i], rho, rhoFaces, a, &clipped[k]);
    auto [G, residual] = solver.solve(sig, rhs);
    if (residual < 0.0 || !G.allFinite()) {
      throw pde::SolverError(fmt::format("weighted elliptic solve failed at slice {}", k));
    }
    const double value = 0.5 * rhs.dot(G);
    if (value < -1e-10) {
      throw ConsistencyError(fmt::format("negative rate functional contribution {:.3e} at slice {}", value, k));
    }
    rep.perSlice[k] = std::max(value, 0.0);
    residuals[k] = residual;
    if (out.optimizer) out.optimizer->frames[k].assign(G.data(), G.data() + n);
  });

  for (int k = 0; k < frames; ++k) {
    rep.IT += rep.sliceWeights[k] * rep.perSlice[k];
    rep.maxResidual = std::max(rep.maxResidual, residuals[k]);
    rep.clippedWeights += clipped[k];
  }
  rep.QT = energy_QT(traj, b);
  rep.ET = dissipation_ET(traj, b, &rep.degenerateFrames);
  return out;
}

double bernoulli_relative_entropy(double x, double y) {
  if (!(y > 0.0 && y < 1.0)) throw DomainError("reference density must lie in (0,1)");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("density must lie in [0,1]");
  double h = 0.0;
  if (x > 0.0) h += x * std::log(x / y);
  if (x < 1.0) h += (1.0 - x) * std::log((1.0 - x) / (1.0 - y));
  return std::max(h, 0.0);
}

double relative_free_energy(const DensityField& rho, const DensityField& ref) {
  if (!(rho.mesh() == ref.mesh())) throw GridMismatch("fields live on different meshes");
  double s = 0.0;
  for (int k = 0; k < rho.mesh().node_count(); ++k) s += bernoulli_relative_entropy(rho[k], ref[k]);
  return s * rho.mesh().cell_volume();
}

void write_slices_csv(std::ostream& os, const FunctionalReport& report, double dt) {
  os << "slice,t,weight,value\n";
  for (std::size_t k = 0; k < report.perSlice.size(); ++k) {
    os << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", k, k * dt, report.sliceWeights[k], report.perSlice[k]);
  }
}

Trajectory random_trajectory(const Mesh& mesh, int steps, double T, Rng& rng) {
  std::array<double, 6> c{};
  for (double& x : c) x = 0.15 * rng.normal();
  const double level = 0.3 + 0.4 * rng.uniform();
  Trajectory out{mesh, T / steps, {}};
  for (int k = 0; k <= steps; ++k) {
    const double t = k * out.dt;
    std::vector<double> v(mesh.node_count());
    for (int n = 0; n < mesh.node_count(); ++n) {
      const auto u = mesh.center(n);
      double s = level + 0.2 * u[0];
      s += c[0] * std::sin(M_PI * (u[0] + 1.0)) * std::cos(2.0 * t);
      s += c[1] * std::cos(1.5 * M_PI * u[0]) * t;
      s += c[2] * std::sin(0.5 * M_PI * (u[0] + 1.0)) * std::sin(3.0 * t);
      s += c[4] * std::cos(3.0 * M_PI * u[0]) * std::cos(t);
      if (mesh.d > 1) s += c[3] * std::cos(2.0 * M_PI * u[1]) * (1.0 + c[5] * t);
      v[n] = std::clamp(s, 0.05, 0.95);
    }
    out.frames.push_back(std::move(v));
  }
  return out;
}

TestField random_test_field(const Trajectory& traj, Rng& rng) {
  const int m = 1 + static_cast<int>(rng.below(6));
  const int q = static_cast<int>(rng.below(3));
  const double amp = std::exp(2.0 * rng.normal() - 1.0);
  const double w = 4.0 * rng.uniform();
  const double ph = 6.283185307179586 * rng.uniform();
  const double mix = rng.normal();
  return TestField::from_function(traj, [&](double t, std::span<const double> u) {
    double g = amp * std::sin(m * M_PI * (u[0] + 1.0) / 2.0) * std::cos(w * t + ph);
    if (u.size() > 1) g *= 1.0 + mix * std::cos(2.0 * M_PI * q * u[1] + ph);
    return g;
  });
}

}  // namespace bdex::func

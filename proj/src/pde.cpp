#include "bdex/pde.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include <Eigen/Sparse>
#include <fmt/format.h>

namespace bdex::pde {

namespace {

void check_density(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("density must lie in [0,1], got " + std::to_string(r));
}

}  // namespace

double phi(double r, double a) {
  check_density(r);
  return r * (1.0 + a * r);
}

double phi_prime(double r, double a) {
  check_density(r);
  return 1.0 + 2.0 * a * r;
}

double sigma(double r, double a) {
  check_density(r);
  return 2.0 * r * (1.0 - r) * (1.0 + 2.0 * a * r);
}

double chi(double r) {
  check_density(r);
  return r * (1.0 - r);
}

double max_phi_prime(double a) { return std::max(1.0, 1.0 + 2.0 * a); }

double phi_inverse(double y, double a) {
  const double top = 1.0 + a;
  constexpr double slack = 1e-13;
  if (!(y >= -slack && y <= top + slack)) {
    throw DomainError("phi_inverse argument outside [0, 1+a]: " + std::to_string(y));
  }
  y = std::clamp(y, 0.0, top);
  // Root of a r^2 + r - y = 0 written without cancellation; reduces to y at a = 0.
  const double r = 2.0 * y / (1.0 + std::sqrt(1.0 + 4.0 * a * y));
  return std::clamp(r, 0.0, 1.0);
}

CflError::CflError(double dt, double bound_)
    : std::invalid_argument(fmt::format("time step {:.6g} exceeds the CFL bound {:.6g}", dt, bound_)),
      bound(bound_) {}

void Mesh::validate() const {
  if (d < 1) throw DomainError("mesh dimension must be >= 1");
  if (M1 < 2) throw DomainError("mesh needs M1 >= 2");
  if (d > 1 && Mt < 1) throw DomainError("mesh needs Mt >= 1");
}

int Mesh::transverse_count() const {
  int n = 1;
  for (int j = 1; j < d; ++j) n *= Mt;
  return n;
}

double Mesh::cell_volume() const { return h1() * std::pow(ht(), d - 1); }

std::vector<double> Mesh::center(int node) const {
  std::vector<double> u(d);
  u[0] = -1.0 + (first_index(node) + 0.5) * h1();
  int rest = transverse_index(node);
  for (int j = d - 1; j >= 1; --j) {
    u[j] = (rest % Mt + 0.5) * ht();
    rest /= Mt;
  }
  return u;
}

std::vector<MeshFace> mesh_faces(const Mesh& mesh) {
  mesh.validate();
  const int T = mesh.transverse_count();
  const double h1 = mesh.h1();
  const double ht = mesh.ht();
  const double area1 = std::pow(ht, mesh.d - 1);
  std::vector<MeshFace> faces;
  for (int t = 0; t < T; ++t) {
    faces.push_back({-1, t, 0, t, 0.5 * h1, area1});
    for (int i = 0; i + 1 < mesh.M1; ++i) faces.push_back({i * T + t, (i + 1) * T + t, 0, t, h1, area1});
    faces.push_back({(mesh.M1 - 1) * T + t, -1, 0, t, 0.5 * h1, area1});
  }
  if (mesh.d > 1 && mesh.Mt > 1) {
    const double areaT = h1 * std::pow(ht, mesh.d - 2);
    for (int node = 0; node < mesh.node_count(); ++node) {
      int stride = 1;
      for (int j = mesh.d - 1; j >= 1; --j) {
        const int cj = (node / stride) % mesh.Mt;
        const int next = node + (((cj + 1) % mesh.Mt) - cj) * stride;
        faces.push_back({node, next, j, mesh.transverse_index(node), ht, areaT});
        stride *= mesh.Mt;
      }
    }
  }
  return faces;
}

FaceValues sample_boundary(const Mesh& mesh, const BoundaryProfile& b) {
  FaceValues out;
  const int T = mesh.transverse_count();
  for (int t = 0; t < T; ++t) {
    auto u = mesh.center(t);
    std::span<const double> transverse(u.data() + 1, u.size() - 1);
    out.left.push_back(b.value(Face::Left, transverse));
    out.right.push_back(b.value(Face::Right, transverse));
  }
  return out;
}

FaceValues zero_faces(const Mesh& mesh) {
  const int T = mesh.transverse_count();
  return {std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)};
}

DensityField::DensityField(Mesh mesh, std::vector<double> values) : mesh_(mesh), values_(std::move(values)) {
  mesh_.validate();
  if (static_cast<int>(values_.size()) != mesh_.node_count()) {
    throw DomainError("field size does not match mesh");
  }
  for (double v : values_) check_density(v);
}

DensityField DensityField::constant(const Mesh& mesh, double c) {
  return DensityField(mesh, std::vector<double>(mesh.node_count(), c));
}

DensityField DensityField::from_function(const Mesh& mesh,
                                         const std::function<double(std::span<const double>)>& f) {
  std::vector<double> v(mesh.node_count());
  for (int n = 0; n < mesh.node_count(); ++n) v[n] = f(mesh.center(n));
  return DensityField(mesh, std::move(v));
}

double DensityField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double DensityField::max() const { return *std::max_element(values_.begin(), values_.end()); }

Trajectory Trajectory::reversed() const {
  Trajectory out{mesh, dt, frames};
  std::reverse(out.frames.begin(), out.frames.end());
  return out;
}

Trajectory Trajectory::slice(int first, int last) const {
  if (first < 0 || last >= frame_count() || first >= last) throw DomainError("invalid trajectory slice");
  Trajectory out{mesh, dt, {}};
  out.frames.assign(frames.begin() + first, frames.begin() + last + 1);
  return out;
}

void laplacian(const Mesh& mesh, std::span<const double> w, const FaceValues& faces, std::span<double> out) {
  const int n = mesh.node_count();
  const int T = mesh.transverse_count();
  const double inv1 = 1.0 / (mesh.h1() * mesh.h1());
  for (int node = 0; node < n; ++node) {
    const int i = mesh.first_index(node);
    const int t = mesh.transverse_index(node);
    const double left = i > 0 ? w[node - T] : 2.0 * faces.left[t] - w[node];
    const double right = i + 1 < mesh.M1 ? w[node + T] : 2.0 * faces.right[t] - w[node];
    double acc = (left - 2.0 * w[node] + right) * inv1;
    if (mesh.d > 1) {
      const double invt = 1.0 / (mesh.ht() * mesh.ht());
      int stride = 1;
      for (int j = mesh.d - 1; j >= 1; --j) {
        const int cj = (node / stride) % mesh.Mt;
        const int up = node + (((cj + 1) % mesh.Mt) - cj) * stride;
        const int down = node + (((cj - 1 + mesh.Mt) % mesh.Mt) - cj) * stride;
        acc += (w[up] - 2.0 * w[node] + w[down]) * invt;
        stride *= mesh.Mt;
      }
    }
    out[node] = acc;
  }
}

std::vector<double> phi_laplacian(const Mesh& mesh, std::span<const double> rho, const FaceValues& b, double a) {
  std::vector<double> w(rho.size());
  for (std::size_t k = 0; k < rho.size(); ++k) w[k] = phi(rho[k], a);
  FaceValues wf = b;
  for (double& v : wf.left) v = phi(v, a);
  for (double& v : wf.right) v = phi(v, a);
  std::vector<double> out(rho.size());
  laplacian(mesh, w, wf, out);
  return out;
}

DensityField solve_elliptic(const BoundaryProfile& b, double a, const Mesh& mesh) {
  if (!(a > -0.5)) throw DomainError("interaction strength must satisfy a > -1/2");
  mesh.validate();
  const FaceValues rhoFaces = sample_boundary(mesh, b);
  FaceValues wFaces = rhoFaces;
  for (double& v : wFaces.left) v = phi(v, a);
  for (double& v : wFaces.right) v = phi(v, a);

  const int n = mesh.node_count();
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (const MeshFace& f : mesh_faces(mesh)) {
    const double c = f.coupling();
    if (f.lo < 0) {
      entries.emplace_back(f.hi, f.hi, c);
      rhs(f.hi) += c * wFaces.left[f.transverse];
    } else if (f.hi < 0) {
      entries.emplace_back(f.lo, f.lo, c);
      rhs(f.lo) += c * wFaces.right[f.transverse];
    } else {
      entries.emplace_back(f.lo, f.lo, c);
      entries.emplace_back(f.hi, f.hi, c);
      entries.emplace_back(f.lo, f.hi, -c);
      entries.emplace_back(f.hi, f.lo, -c);
    }
  }
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(entries.begin(), entries.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
  if (solver.info() != Eigen::Success) throw SolverError("elliptic factorisation failed");
  const Eigen::VectorXd w = solver.solve(rhs);

  std::vector<double> wv(w.data(), w.data() + n);
  std::vector<double> lap(n);
  laplacian(mesh, wv, wFaces, lap);
  // Residual relative to the stencil magnitude times the solution size.
  double scale = 2.0 / (mesh.h1() * mesh.h1());
  if (mesh.d > 1) scale += 2.0 * (mesh.d - 1) / (mesh.ht() * mesh.ht());
  scale *= std::max(1.0, w.cwiseAbs().maxCoeff());
  double residual = 0.0;
  for (double v : lap) residual = std::max(residual, std::abs(v) / scale);
  if (!w.allFinite() || residual > 1e-10) {
    throw SolverError(fmt::format("elliptic solve did not converge: residual {:.3e}", residual));
  }
  std::vector<double> rho(n);
  for (int k = 0; k < n; ++k) rho[k] = phi_inverse(wv[k], a);
  return DensityField(mesh, std::move(rho));
}

double cfl_bound(const Mesh& mesh, double a) {
  // Boundary cells carry weight 3/h1^2 (reflected ghost), transverse ones 2/ht^2.
  double weight = 3.0 / (mesh.h1() * mesh.h1());
  if (mesh.d > 1) weight += 2.0 * (mesh.d - 1) / (mesh.ht() * mesh.ht());
  return 0.9 / (max_phi_prime(a) * weight);
}

ParabolicStepper::ParabolicStepper(DensityField rho0, const BoundaryProfile& b, double a, double dt)
    : rho_(std::move(rho0)), a_(a), dt_(dt) {
  if (!(a > -0.5)) throw DomainError("interaction strength must satisfy a > -1/2");
  const double bound = cfl_bound(rho_.mesh(), a);
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) throw CflError(dt, bound);
  faces_ = sample_boundary(rho_.mesh(), b);
  scratch_.resize(rho_.mesh().node_count());
}

void ParabolicStepper::step() {
  const Mesh& mesh = rho_.mesh();
  const auto lap = phi_laplacian(mesh, rho_.values(), faces_, a_);
  const double vol = mesh.cell_volume();
  auto v = rho_.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double next = v[k] + dt_ * lap[k];
    const double clipped = std::clamp(next, 0.0, 1.0);
    clipMass_ += std::abs(next - clipped) * vol;
    v[k] = clipped;
  }
  time_ += dt_;
}

ParabolicSolution solve_parabolic(const DensityField& rho0, const BoundaryProfile& b, double a, double T,
                                  double dt, int saveEvery) {
  if (!(T >= 0.0)) throw DomainError("horizon must be nonnegative");
  if (saveEvery < 1) throw DomainError("saveEvery must be >= 1");
  const double bound = cfl_bound(rho0.mesh(), a);
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) throw CflError(dt, bound);
  int steps = T > 0.0 ? static_cast<int>(std::ceil(T / dt - 1e-9)) : 0;
  // Round the step count up to a multiple of saveEvery.
  steps = (steps + saveEvery - 1) / saveEvery * saveEvery;
  const double step = steps > 0 ? T / steps : dt;

  ParabolicStepper stepper(rho0, b, a, step);
  ParabolicSolution out;
  out.trajectory.mesh = rho0.mesh();
  out.trajectory.dt = step * saveEvery;
  out.trajectory.frames.emplace_back(rho0.values().begin(), rho0.values().end());
  for (int s = 1; s <= steps; ++s) {
    stepper.step();
    if (s % saveEvery == 0) {
      const auto v = stepper.state().values();
      out.trajectory.frames.emplace_back(v.begin(), v.end());
    }
  }
  if (steps == 0) out.trajectory.dt = 0.0;
  out.clipMass = stepper.clip_mass();
  out.steps = steps;
  return out;
}

namespace {

void check_same_mesh(const DensityField& f, const DensityField& g) {
  if (!(f.mesh() == g.mesh())) throw DomainError("fields live on different meshes");
}

}  // namespace

std::function<double(std::span<const double>)> interpolant(const DensityField& field, const BoundaryProfile& b) {
  const Mesh mesh = field.mesh();
  const FaceValues faces = sample_boundary(mesh, b);
  std::vector<double> values(field.values().begin(), field.values().end());
  return [mesh, faces, values](std::span<const double> u) {
    if (static_cast<int>(u.size()) != mesh.d) throw std::invalid_argument("interpolant: wrong point dimension");
    const int T = mesh.transverse_count();
    // Along u1: two neighbours, index -1 and M1 stand for the faces.
    const double s = std::clamp((u[0] + 1.0) / mesh.h1() - 0.5, -0.5, mesh.M1 - 0.5);
    int lo = static_cast<int>(std::floor(s));
    double w1;
    if (lo < 0) {
      w1 = (s + 0.5) / 0.5;
    } else if (lo >= mesh.M1 - 1) {
      lo = mesh.M1 - 1;
      w1 = (s - lo) / 0.5;
    } else {
      w1 = s - lo;
    }
    const int hi = lo + 1;
    auto at = [&](int i1, int t) {
      if (i1 < 0) return faces.left[t];
      if (i1 >= mesh.M1) return faces.right[t];
      return values[i1 * T + t];
    };
    // Transverse corners.
    const int dt = mesh.d - 1;
    std::vector<int> base(dt);
    std::vector<double> frac(dt);
    for (int j = 0; j < dt; ++j) {
      const double sj = u[j + 1] / mesh.ht() - 0.5;
      const double fl = std::floor(sj);
      frac[j] = sj - fl;
      base[j] = static_cast<int>(fl);
    }
    double total = 0.0;
    for (int corner = 0; corner < (1 << dt); ++corner) {
      double weight = 1.0;
      int t = 0;
      for (int j = 0; j < dt; ++j) {
        const int bit = (corner >> j) & 1;
        weight *= bit ? frac[j] : 1.0 - frac[j];
        const int idx = ((base[j] + bit) % mesh.Mt + mesh.Mt) % mesh.Mt;
        t = t * mesh.Mt + idx;
      }
      if (weight == 0.0) continue;
      total += weight * ((1.0 - w1) * at(lo, t) + w1 * at(hi, t));
    }
    return total;
  };
}

double l1_distance(const DensityField& f, const DensityField& g) {
  check_same_mesh(f, g);
  double s = 0.0;
  for (int k = 0; k < f.mesh().node_count(); ++k) s += std::abs(f[k] - g[k]);
  return s * f.mesh().cell_volume();
}

double l2_distance(const DensityField& f, const DensityField& g) {
  check_same_mesh(f, g);
  double s = 0.0;
  for (int k = 0; k < f.mesh().node_count(); ++k) s += (f[k] - g[k]) * (f[k] - g[k]);
  return std::sqrt(s * f.mesh().cell_volume());
}

namespace {

void write_coords(std::ostream& os, const Mesh& mesh, int node) {
  for (double u : mesh.center(node)) os << fmt::format(",{:.17g}", u);
}

std::string coord_header(const Mesh& mesh) {
  std::string h;
  for (int j = 1; j <= mesh.d; ++j) h += fmt::format(",u{}", j);
  return h;
}

}  // namespace

void write_field_csv(std::ostream& os, const DensityField& field) {
  os << "node" << coord_header(field.mesh()) << ",rho\n";
  for (int n = 0; n < field.mesh().node_count(); ++n) {
    os << n;
    write_coords(os, field.mesh(), n);
    os << fmt::format(",{:.17g}\n", field[n]);
  }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int every) {
  os << "frame,t" << coord_header(traj.mesh) << ",rho\n";
  for (int k = 0; k < traj.frame_count(); k += std::max(every, 1)) {
    for (int n = 0; n < traj.mesh.node_count(); ++n) {
      os << fmt::format("{},{:.17g}", k, traj.time(k));
      write_coords(os, traj.mesh, n);
      os << fmt::format(",{:.17g}\n", traj.frames[k][n]);
    }
  }
}

nlohmann::json mesh_json(const Mesh& mesh) {
  return {{"d", mesh.d}, {"M1", mesh.M1}, {"Mt", mesh.Mt}, {"h1", mesh.h1()}, {"ht", mesh.ht()}};
}

nlohmann::json trajectory_header(const Trajectory& traj, double a) {
  return {{"mesh", mesh_json(traj.mesh)},
          {"a", a},
          {"dt", traj.dt},
          {"T", traj.horizon()},
          {"frames", traj.frame_count()}};
}

}  // namespace bdex::pde

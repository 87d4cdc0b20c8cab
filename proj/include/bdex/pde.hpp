#pragma once

#include <algorithm>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "bdex/lattice.hpp"

namespace bdex::pde {

// Transport coefficients of the hydrodynamic equation; all throw DomainError
// for r outside [0,1].
double phi(double r, double a);
double phi_prime(double r, double a);
double sigma(double r, double a);  // mobility 2 r (1-r) (1+2ar)
double chi(double r);              // compressibility r (1-r), sigma = 2 chi phi'
// max over [0,1] of phi' = max(1, 1+2a)
double max_phi_prime(double a);
// Unique r in [0,1] with phi(r) = y; y must lie in [0, 1+a].
double phi_inverse(double y, double a);

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CflError : public std::invalid_argument {
 public:
  CflError(double dt, double bound);
  double bound;
};

// Cell-centred grid on [-1,1] x T^{d-1}: M1 cells along u1 with Dirichlet
// faces at u1 = +-1, Mt periodic cells per transverse direction. Nodes are
// indexed with the first coordinate slowest.
struct Mesh {
  int d = 1;
  int M1 = 2;
  int Mt = 1;

  void validate() const;
  double h1() const { return 2.0 / M1; }
  double ht() const { return 1.0 / Mt; }
  double h_min() const { return d == 1 ? h1() : std::min(h1(), ht()); }
  int transverse_count() const;
  int node_count() const { return M1 * transverse_count(); }
  double cell_volume() const;
  int first_index(int node) const { return node / transverse_count(); }
  int transverse_index(int node) const { return node % transverse_count(); }
  std::vector<double> center(int node) const;

  bool operator==(const Mesh&) const = default;
};

// A face of the finite-volume grid between cells `lo` and `hi` along
// `direction`. lo == -1 marks the left Dirichlet face, hi == -1 the right one.
// Discrete gradient on the face: (v_hi - v_lo) / distance.
struct MeshFace {
  int lo;
  int hi;
  int direction;
  int transverse;   // transverse index, used for boundary data
  double distance;  // h, or h1/2 on Dirichlet faces
  double area;      // cross-section S
  double coupling() const { return area / distance; }
  double volume() const { return area * distance; }  // quadrature weight
  bool on_boundary() const { return lo < 0 || hi < 0; }
};

std::vector<MeshFace> mesh_faces(const Mesh& mesh);

// Values of some field on the two Dirichlet faces, one per transverse node.
struct FaceValues {
  std::vector<double> left;
  std::vector<double> right;
};

// b at the transverse cell centres of each face.
FaceValues sample_boundary(const Mesh& mesh, const BoundaryProfile& b);
FaceValues zero_faces(const Mesh& mesh);

class DensityField {
 public:
  DensityField(Mesh mesh, std::vector<double> values);
  static DensityField constant(const Mesh& mesh, double c);
  static DensityField from_function(const Mesh& mesh, const std::function<double(std::span<const double>)>& f);

  const Mesh& mesh() const { return mesh_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](int node) const { return values_[node]; }
  double& operator[](int node) { return values_[node]; }
  double min() const;
  double max() const;

 private:
  Mesh mesh_;
  std::vector<double> values_;
};

// Frames at t_k = k * dt, k = 0..K, all on one mesh.
struct Trajectory {
  Mesh mesh;
  double dt = 0.0;
  std::vector<std::vector<double>> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  double horizon() const { return dt * (frame_count() - 1); }
  double time(int k) const { return k * dt; }
  DensityField field(int k) const { return DensityField(mesh, frames.at(k)); }
  // Frames reversed in time: rho~(t) = rho(T - t).
  Trajectory reversed() const;
  // Frames first..last inclusive, re-based to start at time 0.
  Trajectory slice(int first, int last) const;
};

// Discrete Laplacian with Dirichlet data on the faces, imposed at ghost nodes
// by reflection (ghost = 2 face - inside).
void laplacian(const Mesh& mesh, std::span<const double> w, const FaceValues& faces, std::span<double> out);

// Delta_h phi(rho) with faces at phi(b).
std::vector<double> phi_laplacian(const Mesh& mesh, std::span<const double> rho, const FaceValues& b, double a);

// Solves Delta phi(rho) = 0, rho = b on the faces, in the variable w = phi(rho).
DensityField solve_elliptic(const BoundaryProfile& b, double a, const Mesh& mesh);

// Largest explicit step keeping the scheme monotone, with a 0.9 safety factor.
double cfl_bound(const Mesh& mesh, double a);

// Explicit Euler for d rho/dt = Delta_h phi(rho), faces held at b, values
// clipped to [0,1].
class ParabolicStepper {
 public:
  ParabolicStepper(DensityField rho0, const BoundaryProfile& b, double a, double dt);

  void step();
  double time() const { return time_; }
  double dt() const { return dt_; }
  const DensityField& state() const { return rho_; }
  double clip_mass() const { return clipMass_; }

 private:
  DensityField rho_;
  FaceValues faces_;
  double a_;
  double dt_;
  double time_ = 0.0;
  double clipMass_ = 0.0;
  std::vector<double> scratch_;
};

struct ParabolicSolution {
  Trajectory trajectory;
  double clipMass = 0.0;
  int steps = 0;
};

// dt is reduced to T / ceil(T / dt) so that the grid ends exactly at T; every
// `saveEvery`-th step is stored. Throws CflError if dt > cfl_bound.
ParabolicSolution solve_parabolic(const DensityField& rho0, const BoundaryProfile& b, double a, double T,
                                  double dt, int saveEvery = 1);

// Multilinear interpolant through the cell centres, periodic transversally,
// with the face samples of b at u1 = -1 and u1 = 1.
std::function<double(std::span<const double>)> interpolant(const DensityField& field, const BoundaryProfile& b);

double l1_distance(const DensityField& f, const DensityField& g);
double l2_distance(const DensityField& f, const DensityField& g);

void write_field_csv(std::ostream& os, const DensityField& field);
// One block per frame: frame, t, node coordinates, value.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int every = 1);
nlohmann::json mesh_json(const Mesh& mesh);
nlohmann::json trajectory_header(const Trajectory& traj, double a);

}  // namespace bdex::pde

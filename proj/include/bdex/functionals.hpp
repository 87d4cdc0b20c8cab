#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "bdex/pde.hpp"
#include "bdex/rng.hpp"

namespace bdex::func {

using pde::DensityField;
using pde::Mesh;
using pde::Trajectory;

// Lower clip for sigma and chi in weighted solves and quadratures.
inline constexpr double kWeightFloor = 1e-10;

// G on the space-time grid of a trajectory, one vector per frame. G is zero on
// the Dirichlet faces by construction: faces are not nodes and the discrete
// gradient across a face uses 0 for the outside value.
struct TestField {
  Mesh mesh;
  double dt = 0.0;
  std::vector<std::vector<double>> frames;

  static TestField zero(const Trajectory& traj);
  // g(t, u) sampled at the frame times and cell centres.
  static TestField from_function(const Trajectory& traj,
                                 const std::function<double(double, std::span<const double>)>& g);
  int frame_count() const { return static_cast<int>(frames.size()); }
  TestField scaled(double s) const;
};

struct FunctionalReport {
  double QT = 0.0;
  double ET = 0.0;
  double IT = 0.0;
  std::vector<double> perSlice;      // slice values before time weighting
  std::vector<double> sliceWeights;  // trapezoid weights, IT = sum w_k perSlice_k
  double maxResidual = 0.0;          // max over slices of |K G - rhs|_inf / |rhs|_inf
  long clippedWeights = 0;           // faces where sigma hit the floor
  int degenerateFrames = 0;          // frames with some cell at 0 or 1

  nlohmann::json to_json() const;
};

struct FunctionalOptions {
  bool keepOptimizer = false;
  int jobs = 1;
};

struct RateFunctionalResult {
  FunctionalReport report;
  std::optional<TestField> optimizer;
};

class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Trapezoid weights dt/2, dt, ..., dt, dt/2 for the frames of a trajectory.
std::vector<double> time_weights(int frames, double dt);

// Time derivative per frame: centred inside, one-sided at the two ends.
std::vector<std::vector<double>> time_derivative(const std::vector<std::vector<double>>& frames, double dt);

// int_0^T int |grad rho|^2 with face gradients, b on the Dirichlet faces.
double energy_QT(const Trajectory& traj, const BoundaryProfile& b);

// int_0^T int |grad rho|^2 / chi(rho), chi taken at face means, clipped.
double dissipation_ET(const Trajectory& traj, const BoundaryProfile& b, int* degenerateFrames = nullptr);

// Every term of the linear-quadratic functional for one G.
double evaluate_JG(const Trajectory& traj, const TestField& G, const BoundaryProfile& b, double a);

// Supremum of evaluate_JG over G, one weighted elliptic solve per frame.
RateFunctionalResult rate_functional_IT(const Trajectory& traj, const BoundaryProfile& b, double a,
                                        const FunctionalOptions& options = {});

// x log(x/y) + (1-x) log((1-x)/(1-y)) with 0 log 0 = 0; y must lie in (0,1).
double bernoulli_relative_entropy(double x, double y);

// int h(rho(u), ref(u)) du by cell quadrature.
double relative_free_energy(const DensityField& rho, const DensityField& ref);

// Smooth random trajectory with values in [0.05, 0.95]: a few space-time modes
// around an affine profile. Used by property checks.
Trajectory random_trajectory(const Mesh& mesh, int steps, double T, Rng& rng);

// Random test field: one sine mode along u1 with a random amplitude over
// several decades, a random temporal oscillation and a transverse factor.
TestField random_test_field(const Trajectory& traj, Rng& rng);

void write_slices_csv(std::ostream& os, const FunctionalReport& report, double dt);

}  // namespace bdex::func

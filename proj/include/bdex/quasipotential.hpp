#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bdex/functionals.hpp"
#include "bdex/rng.hpp"

namespace bdex::qp {

using func::FunctionalReport;
using pde::DensityField;
using pde::Mesh;
using pde::Trajectory;

// Increasing C^1 map alpha: [0,1] -> [0,1] with alpha(0) = 0, alpha(1) = 1.
// Either t^p (p > 1/2) or a monotone piecewise-cubic Hermite interpolant
// through knots (k/(n-1), y_k).
class InterpolationSchedule {
 public:
  static InterpolationSchedule power(double p);
  // y_0 = 0 < y_1 < ... < y_{n-1} = 1, n >= 2.
  static InterpolationSchedule cubic(std::vector<double> knots);

  double alpha(double t) const;
  double derivative(double t) const;
  double integral_alpha_squared() const;
  double integral_derivative_squared() const;

  bool is_power() const { return knots_.empty(); }
  double exponent() const { return p_; }
  const std::vector<double>& knots() const { return knots_; }
  nlohmann::json to_json() const;

 private:
  InterpolationSchedule() = default;
  void hermite(double t, double& value, double& slope) const;

  double p_ = 1.0;
  std::vector<double> knots_;
  std::vector<double> slopes_;
};

enum class ScheduleFamily { Power, Cubic };
enum class EstimateMethod { Interpolation, Reversal, BestOf };

std::string to_string(ScheduleFamily family);
std::string to_string(EstimateMethod method);

struct QuasiPotentialEstimate {
  double value = 0.0;
  EstimateMethod method = EstimateMethod::Interpolation;
  FunctionalReport pathCost;
  nlohmann::json diagnostics;

  nlohmann::json to_json() const;
};

struct InterpolationOptions {
  int frames = 64;  // time intervals on [0,1]
  double pMin = 0.6;
  double pMax = 4.0;
  int goldenIterations = 30;
  int cubicKnots = 8;
  int cubicSweeps = 3;
  int lineIterations = 12;
  // Largest |extrapolated face value - b| accepted before the boundary-condition flag is raised.
  double faceTolerance = 0.02;
  int jobs = 1;
};

// Frames (1 - alpha(t_k)) rhoBar + alpha(t_k) rho at t_k = k / frames.
Trajectory interpolation_path(const DensityField& rho, const DensityField& rhoBar,
                              const InterpolationSchedule& schedule, int frames = 64);

// Cost of the cheapest interpolation path from the stationary profile to rho
// over the schedule family: golden-section search in p, then (for Cubic)
// coordinate descent on the interior knots starting from the best power law.
QuasiPotentialEstimate quasipotential_upper_interpolation(const DensityField& rho, const BoundaryProfile& b,
                                                          double a, ScheduleFamily family,
                                                          const InterpolationOptions& options = {});

struct ReversalOptions {
  double T = 0.0;  // 0 selects the adaptive horizon
  double tolerance = 1e-3;
  double maxT = 16.0;
  double cflFraction = 0.25;
  int frameCap = 50000;
  InterpolationOptions residual;
  int jobs = 1;
};

// Relaxes rho towards the stationary profile, reverses the trajectory and adds
// the interpolation cost from the stationary profile to the relaxed endpoint.
QuasiPotentialEstimate quasipotential_upper_reversal(const DensityField& rho, const BoundaryProfile& b, double a,
                                                     const ReversalOptions& options = {});

QuasiPotentialEstimate best_of(const QuasiPotentialEstimate& x, const QuasiPotentialEstimate& y);

// Random density with values in [0,1]; roughly half the draws touch 0 or 1.
DensityField random_density_field(const Mesh& mesh, Rng& rng);

struct BoundednessReport {
  std::vector<std::string> labels;
  std::vector<double> estimates;
  double max = 0.0;
  int argmax = -1;
  bool allFinite = true;

  double quantile(double q) const;
  nlohmann::json to_json() const;
};

// Sample 0 is rho = 0, sample 1 is rho = 1, sample 2 the stationary profile;
// sample i >= 3 is drawn from stream i of `rng`, so a larger sweep contains a
// smaller one.
BoundednessReport boundedness_sweep(const BoundaryProfile& b, double a, const Mesh& mesh, int sampleCount,
                                    const RngSpec& rng, const ReversalOptions& options = {});

}  // namespace bdex::qp

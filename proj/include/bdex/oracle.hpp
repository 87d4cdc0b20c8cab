#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bdex/lattice.hpp"

namespace bdex::oracle {

// Dense generator on {0,1}^{Omega_N}; row = from-state, state code bit k =
// occupation of site k. Entries include the N^2 speed-up.
using GeneratorMatrix = Eigen::MatrixXd;

inline constexpr int kMaxSites = 12;
inline constexpr int kMaxTransientSites = 10;

class StateSpaceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Built by an exhaustive loop over ordered state pairs, reading the rates
// straight from the coordinates of the differing sites. Shares no code with
// the simulator's event tables.
GeneratorMatrix build_generator(const ModelParams& params, const BoundaryProfile& b);

// Same matrix assembled from enumerate_events; the two routes must agree exactly.
GeneratorMatrix generator_from_events(const LatticeGeometry& geom, const BoundaryProfile& b);

// Unique probability vector with mu^T L = 0: one balance equation replaced by
// normalisation, dense LU. Throws if the residual exceeds 1e-12 ||L||.
Eigen::VectorXd stationary_vector(const GeneratorMatrix& L);

// Law at time t of the chain started at `initialState`, by uniformisation.
Eigen::VectorXd transient_law(const GeneratorMatrix& L, std::uint64_t initialState, double t);

// E_mu[eta(x)] for every site.
Eigen::VectorXd mean_occupation(const Eigen::VectorXd& law, int siteCount);

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double pvalue = 1.0;
};

// Pearson goodness of fit of observed counts against probabilities. Bins with
// expected count below 5 are pooled into one bin.
ChiSquare chi_square_test(const Eigen::VectorXd& probabilities, const std::vector<long>& counts);

}  // namespace bdex::oracle

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bdex/lattice.hpp"
#include "bdex/rng.hpp"

namespace bdex {

// Complete binary tree of partial sums over event rates. Leaves hold rates;
// each internal node is recomputed from its two children on update, so the
// root never accumulates round-off drift.
class RateTree {
 public:
  RateTree() = default;
  explicit RateTree(std::span<const double> rates);

  int size() const { return count_; }
  double total() const { return nodes_.empty() ? 0.0 : nodes_[1]; }
  double rate(int i) const { return nodes_[leaves_ + i]; }
  void set(int i, double rate);
  // Leaf i with prefix(i) <= target < prefix(i) + rate(i), for target in [0, total).
  int find(double target) const;

 private:
  int count_ = 0;
  int leaves_ = 0;
  std::vector<double> nodes_;
};

// Continuous-time simulation of the process with generator N^2 (L_bulk + L_boundary).
// Rates are kept unscaled; the N^2 speed-up is applied to the clock, so t is
// macroscopic time. Exchanges of equal occupations are no-ops and are given
// rate zero, which leaves the law of the state process unchanged.
class Simulator {
 public:
  Simulator(const LatticeGeometry& geom, const BoundaryProfile& b, Configuration eta0,
            const RngSpec& rng);

  double time() const { return time_; }
  const Configuration& state() const { return eta_; }
  std::uint64_t event_count() const { return events_; }
  const LatticeGeometry& geometry() const { return geom_; }
  double total_rate() const { return tree_.total(); }

  // Fires the next event if it occurs no later than tLimit; otherwise moves
  // the clock to tLimit (memorylessness makes this exact). Returns whether an
  // event fired.
  bool step(double tLimit);
  void advance_to(double t);

  // Per-site integral of eta_t(x) dt since the last reset.
  void reset_occupation_integral();
  std::vector<double> occupation_integral();

 private:
  void touch(Site x);
  void refresh(Site x);

  LatticeGeometry geom_;
  Reservoirs reservoirs_;
  Configuration eta_;
  Rng rng_;
  double scale_;  // N^2
  double time_ = 0.0;
  std::uint64_t events_ = 0;
  std::vector<Event> catalog_;
  std::vector<std::vector<int>> dependents_;  // site -> events whose rate reads it
  RateTree tree_;
  bool integrating_ = false;
  std::vector<double> lastTouch_;
  std::vector<double> integral_;
};

// Snapshot callback invoked at each requested macroscopic time with a copy of the state.
struct Observer {
  std::vector<double> times;
  std::function<void(double, Configuration)> callback;
};

struct SimulationResult {
  Configuration final;
  std::uint64_t events = 0;
};

SimulationResult simulate(const LatticeGeometry& geom, const BoundaryProfile& b,
                          const Configuration& eta0, double T, const RngSpec& rng,
                          std::span<Observer> observers = {});

// Coarse-grained density: M cells of width 2/M along u1 and M cells of width
// 1/M in each transverse direction, cells indexed first coordinate slowest.
struct EmpiricalProfile {
  int dim = 1;
  int cells = 1;
  std::vector<double> values;

  double cell_width() const { return 2.0 / cells; }
  double cell_volume() const;
  double total_mass() const;
  // Midpoint of the cell along u1.
  double cell_center(int c1) const { return -1.0 + (c1 + 0.5) * cell_width(); }
};

// Cell of each site under left-closed binning of x/N.
std::vector<int> site_cells(const LatticeGeometry& geom, int cells);

// Bins per-site weights w(x) as N^{-d} sum_{x in cell} w(x) / cell volume.
EmpiricalProfile bin_site_values(const LatticeGeometry& geom, std::span<const double> weights, int cells);

EmpiricalProfile empirical_profile(const LatticeGeometry& geom, const Configuration& eta, int cells);

// A deterministic density evaluated at the site positions x/N and binned like
// an empirical profile. This is the expectation of the empirical profile of a
// product measure with that density.
EmpiricalProfile binned_density(const LatticeGeometry& geom,
                                const std::function<double(std::span<const double>)>& rho, int cells);

struct StationaryOptions {
  double burnIn = 1.0;
  int samples = 200;
  double spacing = 0.05;
  int cells = 8;
  int batches = 20;
};

struct StationaryProfile {
  EmpiricalProfile mean;
  std::vector<double> standardError;  // batch means
  int batches = 0;
  std::uint64_t events = 0;
  double simulatedTime = 0.0;
  std::vector<EmpiricalProfile> batchMeans;
};

// Each sample is the exact time average of the empirical profile over one
// spacing interval after burn-in; standard errors come from batch means.
StationaryProfile stationary_profile_experiment(const LatticeGeometry& geom, const BoundaryProfile& b,
                                                const StationaryOptions& options, const RngSpec& rng);

// Pools replicas by concatenating their batch means, in the given order.
StationaryProfile merge_replicas(std::span<const StationaryProfile> replicas);

struct HittingOptions {
  int cells = 4;
  double checkInterval = 0.01;
};

// First check time at which the empirical profile satisfies the target, or
// nullopt if none up to Tmax.
std::optional<double> hitting_time(const LatticeGeometry& geom, const BoundaryProfile& b,
                                   const Configuration& eta0,
                                   const std::function<bool(const EmpiricalProfile&)>& target,
                                   double Tmax, const RngSpec& rng, const HittingOptions& options = {});

// Fraction of time spent in each state code after burn-in, over `events`
// events of one run. Requires site_count <= 20.
std::vector<double> state_time_fractions(const LatticeGeometry& geom, const BoundaryProfile& b,
                                         const Configuration& eta0, double burnIn, std::uint64_t events,
                                         const RngSpec& rng);

// Counts of the state code at time t over independent replicas; replica r
// uses stream rng.streamId + r.
std::vector<long> final_state_counts(const LatticeGeometry& geom, const BoundaryProfile& b,
                                     const Configuration& eta0, double t, long replicas, const RngSpec& rng,
                                     int jobs = 1);

}  // namespace bdex

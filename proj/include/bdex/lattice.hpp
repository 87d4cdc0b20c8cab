#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace bdex {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Interaction strength a, dimension d and lattice scale N.
struct ModelParams {
  double a = 0.0;
  int d = 1;
  int N = 2;

  // Throws DomainError unless a > -1/2, d >= 1, N >= 2.
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

enum class Face { Left, Right };

// Reservoir density on the two faces {-1} x T^{d-1} and {+1} x T^{d-1}.
// Each face is a function of the d-1 transverse coordinates in [0,1).
class BoundaryProfile {
 public:
  using FaceFunction = std::function<double(std::span<const double>)>;

  static BoundaryProfile constant(double c);
  // Constant on each face; the usual "affine in u1" reservoir pair.
  static BoundaryProfile two_sided(double left, double right);
  static BoundaryProfile from_functions(FaceFunction left, FaceFunction right);
  // Periodic piecewise-linear interpolation of samples taken at u = k/n along
  // the first transverse direction (further transverse directions ignored).
  static BoundaryProfile tabulated(std::vector<double> left, std::vector<double> right);

  // Throws DomainError if the value is outside (0, 1).
  double value(Face face, std::span<const double> transverse) const;

 private:
  BoundaryProfile(FaceFunction left, FaceFunction right)
      : left_(std::move(left)), right_(std::move(right)) {}

  FaceFunction left_;
  FaceFunction right_;
};

using Site = int;

// Omega_N = {-N+1..N-1} x {0..N-1}^{d-1}. Sites are indexed row-major with
// the first (non-periodic) coordinate slowest:
//   index = (x1 + N - 1) * N^{d-1} + sum_{j>=2} x_j * N^{d-j}.
// Transverse coordinates wrap modulo N.
class LatticeGeometry {
 public:
  explicit LatticeGeometry(ModelParams params);

  const ModelParams& params() const { return params_; }
  int dim() const { return params_.d; }
  int scale() const { return params_.N; }
  int site_count() const { return siteCount_; }
  int transverse_count() const { return transverseCount_; }

  std::vector<int> coords(Site s) const;
  Site index(std::span<const int> coords) const;
  bool contains(std::span<const int> coords) const;

  // Site reached by moving `steps` along direction i (0-based). Direction 0
  // never wraps and may leave the domain (nullopt); others wrap periodically.
  std::optional<Site> shift(Site s, int direction, int steps) const;

  int first_coord(Site s) const { return s / transverseCount_ - (params_.N - 1); }
  int transverse_index(Site s) const { return s % transverseCount_; }
  bool on_left_boundary(Site s) const { return first_coord(s) == -(params_.N - 1); }
  bool on_right_boundary(Site s) const { return first_coord(s) == params_.N - 1; }
  bool on_boundary(Site s) const { return on_left_boundary(s) || on_right_boundary(s); }

  const std::vector<Site>& left_boundary() const { return left_; }
  const std::vector<Site>& right_boundary() const { return right_; }

 private:
  ModelParams params_;
  int siteCount_;
  int transverseCount_;
  std::vector<Site> left_;
  std::vector<Site> right_;
};

// Reservoir values read at the transverse lattice points of each face,
// b evaluated at (x_2/N, ..., x_d/N).
class Reservoirs {
 public:
  Reservoirs(const LatticeGeometry& geom, const BoundaryProfile& b);

  double left(int transverseIndex) const { return left_[transverseIndex]; }
  double right(int transverseIndex) const { return right_[transverseIndex]; }

 private:
  std::vector<double> left_;
  std::vector<double> right_;
};

class Configuration {
 public:
  explicit Configuration(int siteCount) : occupancy_(siteCount, 0) {}
  static Configuration empty(const LatticeGeometry& geom);
  static Configuration full(const LatticeGeometry& geom);
  // Bit k of `code` is the occupation of site k (requires site_count <= 63).
  static Configuration from_code(int siteCount, std::uint64_t code);

  int size() const { return static_cast<int>(occupancy_.size()); }
  int count() const { return count_; }
  int operator[](Site s) const { return occupancy_[s]; }
  void set(Site s, int value);
  std::uint64_t code() const;

  // In place versions of apply_exchange / apply_flip.
  void exchange(Site x, Site y);
  void flip(Site x);

  bool operator==(const Configuration& other) const { return occupancy_ == other.occupancy_; }

 private:
  std::vector<std::uint8_t> occupancy_;
  int count_ = 0;
};

// Unscaled exchange rate r_{x,x+e_i}; i is 0-based. Reservoir values replace
// occupations that fall outside Omega_N in the first direction.
double bulk_rate(const LatticeGeometry& geom, const Reservoirs& b, const Configuration& eta,
                 Site x, int direction);

// Unscaled boundary creation/annihilation rate C^b_x.
double boundary_flip_rate(const LatticeGeometry& geom, const Reservoirs& b,
                          const Configuration& eta, Site x);

Configuration apply_exchange(const LatticeGeometry& geom, Configuration eta, Site x, Site y);
Configuration apply_flip(const LatticeGeometry& geom, Configuration eta, Site x);

struct Event {
  enum class Kind { Exchange, Flip };
  Kind kind;
  Site x;
  Site y;         // partner site of an exchange; equals x for a flip
  int direction;  // exchange direction, -1 for a flip
};

struct RatedEvent {
  Event event;
  double rate;          // unscaled
  bool changesState;    // false for exchanges of equal occupations
};

// All exchange bonds (x, x+e_i) of Omega_N plus one flip per boundary site,
// in a fixed order: bonds by site then direction, then left and right faces.
std::vector<Event> event_catalog(const LatticeGeometry& geom);

double event_rate(const LatticeGeometry& geom, const Reservoirs& b, const Configuration& eta,
                  const Event& e);

std::vector<RatedEvent> enumerate_events(const LatticeGeometry& geom, const Reservoirs& b,
                                         const Configuration& eta);

// Sum of rates of the state-changing events: the unscaled exit rate.
double exit_rate(std::span<const RatedEvent> events);

}  // namespace bdex

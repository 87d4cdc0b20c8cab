#include "bdex/lattice.hpp"

#include <cmath>
#include <string>

namespace bdex {

void ModelParams::validate() const {
  if (!(a > -0.5)) throw DomainError("interaction strength must satisfy a > -1/2, got " + std::to_string(a));
  if (d < 1) throw DomainError("dimension must be >= 1");
  if (N < 2) throw DomainError("lattice scale N must be >= 2");
}

BoundaryProfile BoundaryProfile::constant(double c) { return two_sided(c, c); }

BoundaryProfile BoundaryProfile::two_sided(double left, double right) {
  return BoundaryProfile([left](std::span<const double>) { return left; },
                         [right](std::span<const double>) { return right; });
}

BoundaryProfile BoundaryProfile::from_functions(FaceFunction left, FaceFunction right) {
  return BoundaryProfile(std::move(left), std::move(right));
}

namespace {

double periodic_linear(const std::vector<double>& samples, double u) {
  const auto n = static_cast<int>(samples.size());
  if (n == 1) return samples[0];
  double pos = (u - std::floor(u)) * n;
  int k = static_cast<int>(std::floor(pos));
  if (k >= n) k = n - 1;
  const double w = pos - k;
  return (1.0 - w) * samples[k] + w * samples[(k + 1) % n];
}

}  // namespace

BoundaryProfile BoundaryProfile::tabulated(std::vector<double> left, std::vector<double> right) {
  if (left.empty() || right.empty()) throw DomainError("tabulated boundary needs at least one sample per face");
  auto make = [](std::vector<double> samples) {
    return [samples = std::move(samples)](std::span<const double> t) {
      return t.empty() ? samples[0] : periodic_linear(samples, t[0]);
    };
  };
  return BoundaryProfile(make(std::move(left)), make(std::move(right)));
}

double BoundaryProfile::value(Face face, std::span<const double> transverse) const {
  const double v = face == Face::Left ? left_(transverse) : right_(transverse);
  if (!(v > 0.0 && v < 1.0)) {
    throw DomainError("boundary density must lie in (0,1), got " + std::to_string(v));
  }
  return v;
}

LatticeGeometry::LatticeGeometry(ModelParams params) : params_(params) {
  params_.validate();
  transverseCount_ = 1;
  for (int j = 1; j < params_.d; ++j) transverseCount_ *= params_.N;
  siteCount_ = (2 * params_.N - 1) * transverseCount_;
  for (int t = 0; t < transverseCount_; ++t) {
    left_.push_back(t);
    right_.push_back((2 * params_.N - 2) * transverseCount_ + t);
  }
}

std::vector<int> LatticeGeometry::coords(Site s) const {
  std::vector<int> c(params_.d);
  int rest = s % transverseCount_;
  c[0] = first_coord(s);
  for (int j = params_.d - 1; j >= 1; --j) {
    c[j] = rest % params_.N;
    rest /= params_.N;
  }
  return c;
}

bool LatticeGeometry::contains(std::span<const int> c) const {
  if (static_cast<int>(c.size()) != params_.d) return false;
  if (c[0] < -(params_.N - 1) || c[0] > params_.N - 1) return false;
  for (int j = 1; j < params_.d; ++j) {
    if (c[j] < 0 || c[j] >= params_.N) return false;
  }
  return true;
}

Site LatticeGeometry::index(std::span<const int> c) const {
  if (!contains(c)) throw DomainError("site coordinates outside Omega_N");
  int idx = c[0] + params_.N - 1;
  for (int j = 1; j < params_.d; ++j) idx = idx * params_.N + c[j];
  return idx;
}

std::optional<Site> LatticeGeometry::shift(Site s, int direction, int steps) const {
  if (s < 0 || s >= siteCount_) throw DomainError("site index out of range");
  if (direction < 0 || direction >= params_.d) throw DomainError("direction out of range");
  if (direction == 0) {
    const int x1 = first_coord(s) + steps;
    if (x1 < -(params_.N - 1) || x1 > params_.N - 1) return std::nullopt;
    return s + steps * transverseCount_;
  }
  int stride = 1;
  for (int j = params_.d - 1; j > direction; --j) stride *= params_.N;
  const int cj = (s / stride) % params_.N;
  const int moved = ((cj + steps) % params_.N + params_.N) % params_.N;
  return s + (moved - cj) * stride;
}

Reservoirs::Reservoirs(const LatticeGeometry& geom, const BoundaryProfile& b) {
  const int n = geom.transverse_count();
  left_.resize(n);
  right_.resize(n);
  for (int t = 0; t < n; ++t) {
    const auto c = geom.coords(geom.left_boundary()[t]);
    std::vector<double> u;
    for (int j = 1; j < geom.dim(); ++j) u.push_back(static_cast<double>(c[j]) / geom.scale());
    left_[t] = b.value(Face::Left, u);
    right_[t] = b.value(Face::Right, u);
  }
}

Configuration Configuration::empty(const LatticeGeometry& geom) { return Configuration(geom.site_count()); }

Configuration Configuration::full(const LatticeGeometry& geom) {
  Configuration c(geom.site_count());
  for (int s = 0; s < c.size(); ++s) c.set(s, 1);
  return c;
}

Configuration Configuration::from_code(int siteCount, std::uint64_t code) {
  if (siteCount > 63) throw DomainError("state code supports at most 63 sites");
  Configuration c(siteCount);
  for (int s = 0; s < siteCount; ++s) c.set(s, static_cast<int>((code >> s) & 1u));
  return c;
}

void Configuration::set(Site s, int value) {
  if (value != 0 && value != 1) throw DomainError("occupation must be 0 or 1");
  count_ += value - occupancy_.at(s);
  occupancy_[s] = static_cast<std::uint8_t>(value);
}

std::uint64_t Configuration::code() const {
  if (size() > 63) throw DomainError("state code supports at most 63 sites");
  std::uint64_t c = 0;
  for (int s = 0; s < size(); ++s) c |= static_cast<std::uint64_t>(occupancy_[s]) << s;
  return c;
}

void Configuration::exchange(Site x, Site y) {
  std::swap(occupancy_[x], occupancy_[y]);
}

void Configuration::flip(Site x) {
  occupancy_[x] ^= 1u;
  count_ += occupancy_[x] ? 1 : -1;
}

namespace {

void check_site(const LatticeGeometry& geom, Site s) {
  if (s < 0 || s >= geom.site_count()) throw DomainError("site outside Omega_N");
}

}  // namespace

double bulk_rate(const LatticeGeometry& geom, const Reservoirs& b, const Configuration& eta,
                 Site x, int direction) {
  check_site(geom, x);
  if (!geom.shift(x, direction, 1)) throw DomainError("bond leaves Omega_N");
  const double a = geom.params().a;
  const auto behind = geom.shift(x, direction, -1);
  const auto ahead = geom.shift(x, direction, 2);
  // Only direction 0 can leave the domain; the missing neighbour is then the
  // reservoir on the corresponding face.
  const double left = behind ? eta[*behind] : b.left(geom.transverse_index(x));
  const double right = ahead ? eta[*ahead] : b.right(geom.transverse_index(x));
  return 1.0 + a * (left + right);
}

double boundary_flip_rate(const LatticeGeometry& geom, const Reservoirs& b,
                          const Configuration& eta, Site x) {
  check_site(geom, x);
  double rho;
  if (geom.on_left_boundary(x)) {
    rho = b.left(geom.transverse_index(x));
  } else if (geom.on_right_boundary(x)) {
    rho = b.right(geom.transverse_index(x));
  } else {
    throw DomainError("flip requested at a non-boundary site");
  }
  return eta[x] ? 1.0 - rho : rho;
}

Configuration apply_exchange(const LatticeGeometry& geom, Configuration eta, Site x, Site y) {
  check_site(geom, x);
  check_site(geom, y);
  eta.exchange(x, y);
  return eta;
}

Configuration apply_flip(const LatticeGeometry& geom, Configuration eta, Site x) {
  check_site(geom, x);
  eta.flip(x);
  return eta;
}

std::vector<Event> event_catalog(const LatticeGeometry& geom) {
  std::vector<Event> events;
  for (Site x = 0; x < geom.site_count(); ++x) {
    for (int i = 0; i < geom.dim(); ++i) {
      if (auto y = geom.shift(x, i, 1)) events.push_back({Event::Kind::Exchange, x, *y, i});
    }
  }
  for (Site x : geom.left_boundary()) events.push_back({Event::Kind::Flip, x, x, -1});
  for (Site x : geom.right_boundary()) events.push_back({Event::Kind::Flip, x, x, -1});
  return events;
}

double event_rate(const LatticeGeometry& geom, const Reservoirs& b, const Configuration& eta,
                  const Event& e) {
  return e.kind == Event::Kind::Exchange ? bulk_rate(geom, b, eta, e.x, e.direction)
                                         : boundary_flip_rate(geom, b, eta, e.x);
}

std::vector<RatedEvent> enumerate_events(const LatticeGeometry& geom, const Reservoirs& b,
                                         const Configuration& eta) {
  std::vector<RatedEvent> out;
  for (const Event& e : event_catalog(geom)) {
    const bool changes = e.kind == Event::Kind::Flip || eta[e.x] != eta[e.y];
    out.push_back({e, event_rate(geom, b, eta, e), changes});
  }
  return out;
}

double exit_rate(std::span<const RatedEvent> events) {
  double total = 0.0;
  for (const auto& e : events) {
    if (e.changesState) total += e.rate;
  }
  return total;
}

}  // namespace bdex

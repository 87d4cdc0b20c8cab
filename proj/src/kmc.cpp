#include "bdex/kmc.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bdex/parallel.hpp"

namespace bdex {

RateTree::RateTree(std::span<const double> rates) : count_(static_cast<int>(rates.size())) {
  leaves_ = 1;
  while (leaves_ < std::max(count_, 1)) leaves_ *= 2;
  nodes_.assign(2 * leaves_, 0.0);
  for (int i = 0; i < count_; ++i) nodes_[leaves_ + i] = rates[i];
  for (int n = leaves_ - 1; n >= 1; --n) nodes_[n] = nodes_[2 * n] + nodes_[2 * n + 1];
}

void RateTree::set(int i, double rate) {
  int n = leaves_ + i;
  nodes_[n] = rate;
  for (n /= 2; n >= 1; n /= 2) nodes_[n] = nodes_[2 * n] + nodes_[2 * n + 1];
}

int RateTree::find(double target) const {
  int n = 1;
  while (n < leaves_) {
    const double left = nodes_[2 * n];
    if (target < left) {
      n = 2 * n;
    } else {
      target -= left;
      n = 2 * n + 1;
    }
  }
  int i = n - leaves_;
  // Round-off can push the walk onto an empty leaf past the last rate.
  while (i > 0 && (i >= count_ || nodes_[leaves_ + i] <= 0.0)) --i;
  return i;
}

Simulator::Simulator(const LatticeGeometry& geom, const BoundaryProfile& b, Configuration eta0,
                     const RngSpec& rng)
    : geom_(geom),
      reservoirs_(geom, b),
      eta_(std::move(eta0)),
      rng_(rng),
      scale_(static_cast<double>(geom.scale()) * geom.scale()),
      catalog_(event_catalog(geom)),
      dependents_(geom.site_count()) {
  if (eta_.size() != geom_.site_count()) throw DomainError("configuration does not match geometry");
  for (int e = 0; e < static_cast<int>(catalog_.size()); ++e) {
    const Event& ev = catalog_[e];
    std::vector<Site> reads{ev.x};
    if (ev.kind == Event::Kind::Exchange) {
      reads.push_back(ev.y);
      if (auto s = geom_.shift(ev.x, ev.direction, -1)) reads.push_back(*s);
      if (auto s = geom_.shift(ev.x, ev.direction, 2)) reads.push_back(*s);
    }
    std::sort(reads.begin(), reads.end());
    reads.erase(std::unique(reads.begin(), reads.end()), reads.end());
    for (Site s : reads) dependents_[s].push_back(e);
  }
  std::vector<double> rates(catalog_.size());
  for (std::size_t e = 0; e < catalog_.size(); ++e) {
    const Event& ev = catalog_[e];
    const bool live = ev.kind == Event::Kind::Flip || eta_[ev.x] != eta_[ev.y];
    rates[e] = live ? event_rate(geom_, reservoirs_, eta_, ev) : 0.0;
  }
  tree_ = RateTree(rates);
  lastTouch_.assign(geom_.site_count(), 0.0);
  integral_.assign(geom_.site_count(), 0.0);
}

void Simulator::refresh(Site x) {
  for (int e : dependents_[x]) {
    const Event& ev = catalog_[e];
    const bool live = ev.kind == Event::Kind::Flip || eta_[ev.x] != eta_[ev.y];
    tree_.set(e, live ? event_rate(geom_, reservoirs_, eta_, ev) : 0.0);
  }
}

void Simulator::touch(Site x) {
  if (!integrating_) return;
  integral_[x] += eta_[x] * (time_ - lastTouch_[x]);
  lastTouch_[x] = time_;
}

bool Simulator::step(double tLimit) {
  const double total = tree_.total();
  if (!(total > 0.0)) {
    time_ = std::max(time_, tLimit);
    return false;
  }
  const double wait = rng_.exponential(scale_ * total);
  if (time_ + wait > tLimit) {
    time_ = std::max(time_, tLimit);
    return false;
  }
  time_ += wait;
  const int e = tree_.find(rng_.uniform() * total);
  const Event& ev = catalog_[e];
  if (ev.kind == Event::Kind::Exchange) {
    [[maybe_unused]] const int before = eta_.count();
    touch(ev.x);
    touch(ev.y);
    eta_.exchange(ev.x, ev.y);
    assert(eta_.count() == before);
    refresh(ev.x);
    refresh(ev.y);
  } else {
    touch(ev.x);
    eta_.flip(ev.x);
    refresh(ev.x);
  }
  ++events_;
  return true;
}

void Simulator::advance_to(double t) {
  while (step(t)) {
  }
}

void Simulator::reset_occupation_integral() {
  integrating_ = true;
  std::fill(integral_.begin(), integral_.end(), 0.0);
  std::fill(lastTouch_.begin(), lastTouch_.end(), time_);
}

std::vector<double> Simulator::occupation_integral() {
  if (!integrating_) throw std::logic_error("occupation integral was never started");
  for (Site x = 0; x < geom_.site_count(); ++x) touch(x);
  return integral_;
}

SimulationResult simulate(const LatticeGeometry& geom, const BoundaryProfile& b,
                          const Configuration& eta0, double T, const RngSpec& rng,
                          std::span<Observer> observers) {
  if (T < 0.0) throw DomainError("simulation horizon must be nonnegative");
  struct Request {
    double t;
    std::size_t observer;
  };
  std::vector<Request> requests;
  for (std::size_t k = 0; k < observers.size(); ++k) {
    for (double t : observers[k].times) {
      if (t >= 0.0 && t <= T) requests.push_back({t, k});
    }
  }
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& l, const Request& r) { return l.t < r.t; });
  Simulator sim(geom, b, eta0, rng);
  for (const auto& req : requests) {
    sim.advance_to(req.t);
    observers[req.observer].callback(req.t, sim.state());
  }
  sim.advance_to(T);
  return {sim.state(), sim.event_count()};
}

double EmpiricalProfile::cell_volume() const {
  return cell_width() * std::pow(1.0 / cells, dim - 1);
}

double EmpiricalProfile::total_mass() const {
  double m = 0.0;
  for (double v : values) m += v;
  return m * cell_volume();
}

std::vector<int> site_cells(const LatticeGeometry& geom, int cells) {
  if (cells < 1) throw DomainError("cell count must be >= 1");
  const int N = geom.scale();
  std::vector<int> out(geom.site_count());
  for (Site s = 0; s < geom.site_count(); ++s) {
    const auto c = geom.coords(s);
    // floor((x1/N + 1) / (2/M)) and floor((xj/N) / (1/M)) in exact integer arithmetic.
    int cell = std::min((c[0] + N) * cells / (2 * N), cells - 1);
    for (int j = 1; j < geom.dim(); ++j) cell = cell * cells + c[j] * cells / N;
    out[s] = cell;
  }
  return out;
}

EmpiricalProfile bin_site_values(const LatticeGeometry& geom, std::span<const double> weights, int cells) {
  const auto map = site_cells(geom, cells);
  EmpiricalProfile p;
  p.dim = geom.dim();
  p.cells = cells;
  int total = 1;
  for (int j = 0; j < p.dim; ++j) total *= cells;
  p.values.assign(total, 0.0);
  for (Site s = 0; s < geom.site_count(); ++s) p.values[map[s]] += weights[s];
  const double norm = std::pow(static_cast<double>(geom.scale()), p.dim) * p.cell_volume();
  for (double& v : p.values) v /= norm;
  return p;
}

EmpiricalProfile empirical_profile(const LatticeGeometry& geom, const Configuration& eta, int cells) {
  std::vector<double> w(geom.site_count());
  for (Site s = 0; s < geom.site_count(); ++s) w[s] = eta[s];
  return bin_site_values(geom, w, cells);
}

EmpiricalProfile binned_density(const LatticeGeometry& geom,
                                const std::function<double(std::span<const double>)>& rho, int cells) {
  std::vector<double> w(geom.site_count());
  std::vector<double> u(geom.dim());
  for (Site s = 0; s < geom.site_count(); ++s) {
    const auto c = geom.coords(s);
    for (int j = 0; j < geom.dim(); ++j) u[j] = static_cast<double>(c[j]) / geom.scale();
    w[s] = rho(u);
  }
  return bin_site_values(geom, w, cells);
}

namespace {

void fill_standard_errors(StationaryProfile& out) {
  const int B = static_cast<int>(out.batchMeans.size());
  const std::size_t n = out.mean.values.size();
  out.batches = B;
  out.mean.values.assign(n, 0.0);
  out.standardError.assign(n, 0.0);
  if (B == 0) return;
  for (const auto& bm : out.batchMeans) {
    for (std::size_t c = 0; c < n; ++c) out.mean.values[c] += bm.values[c] / B;
  }
  if (B < 2) return;
  for (std::size_t c = 0; c < n; ++c) {
    double ss = 0.0;
    for (const auto& bm : out.batchMeans) ss += (bm.values[c] - out.mean.values[c]) * (bm.values[c] - out.mean.values[c]);
    out.standardError[c] = std::sqrt(ss / (B - 1) / B);
  }
}

}  // namespace

StationaryProfile stationary_profile_experiment(const LatticeGeometry& geom, const BoundaryProfile& b,
                                                const StationaryOptions& options, const RngSpec& rng) {
  if (!(options.burnIn > 0.0) || !(options.spacing > 0.0)) {
    throw DomainError("burn-in and spacing must be positive");
  }
  if (options.batches < 1 || options.samples < options.batches) {
    throw DomainError("need at least one sample per batch");
  }
  Simulator sim(geom, b, Configuration::empty(geom), rng);
  sim.advance_to(options.burnIn);
  const int perBatch = options.samples / options.batches;

  StationaryProfile out;
  out.mean = bin_site_values(geom, std::vector<double>(geom.site_count(), 0.0), options.cells);
  double t = options.burnIn;
  for (int batch = 0; batch < options.batches; ++batch) {
    sim.reset_occupation_integral();
    t += perBatch * options.spacing;
    sim.advance_to(t);
    auto integral = sim.occupation_integral();
    for (double& v : integral) v /= perBatch * options.spacing;
    out.batchMeans.push_back(bin_site_values(geom, integral, options.cells));
  }
  out.events = sim.event_count();
  out.simulatedTime = t;
  fill_standard_errors(out);
  return out;
}

StationaryProfile merge_replicas(std::span<const StationaryProfile> replicas) {
  if (replicas.empty()) throw DomainError("no replicas to merge");
  StationaryProfile out;
  out.mean = replicas.front().mean;
  for (const auto& r : replicas) {
    out.events += r.events;
    out.simulatedTime += r.simulatedTime;
    out.batchMeans.insert(out.batchMeans.end(), r.batchMeans.begin(), r.batchMeans.end());
  }
  fill_standard_errors(out);
  return out;
}

std::optional<double> hitting_time(const LatticeGeometry& geom, const BoundaryProfile& b,
                                   const Configuration& eta0,
                                   const std::function<bool(const EmpiricalProfile&)>& target,
                                   double Tmax, const RngSpec& rng, const HittingOptions& options) {
  if (!(Tmax > 0.0)) throw DomainError("Tmax must be positive");
  if (!(options.checkInterval > 0.0)) throw DomainError("check interval must be positive");
  Simulator sim(geom, b, eta0, rng);
  if (target(empirical_profile(geom, sim.state(), options.cells))) return 0.0;
  for (long k = 1;; ++k) {
    const double t = std::min(k * options.checkInterval, Tmax);
    sim.advance_to(t);
    if (target(empirical_profile(geom, sim.state(), options.cells))) return t;
    if (t >= Tmax) return std::nullopt;
  }
}

std::vector<double> state_time_fractions(const LatticeGeometry& geom, const BoundaryProfile& b,
                                         const Configuration& eta0, double burnIn, std::uint64_t events,
                                         const RngSpec& rng) {
  if (geom.site_count() > 20) throw std::invalid_argument("state_time_fractions: too many sites");
  Simulator sim(geom, b, eta0, rng);
  sim.advance_to(burnIn);
  std::vector<double> time(std::size_t{1} << geom.site_count(), 0.0);
  const std::uint64_t start = sim.event_count();
  const double t0 = sim.time();
  while (sim.event_count() - start < events) {
    const double before = sim.time();
    const auto code = sim.state().code();
    if (!sim.step(std::numeric_limits<double>::infinity())) break;
    time[code] += sim.time() - before;
  }
  const double total = sim.time() - t0;
  if (total > 0.0) {
    for (double& v : time) v /= total;
  }
  return time;
}

std::vector<long> final_state_counts(const LatticeGeometry& geom, const BoundaryProfile& b,
                                     const Configuration& eta0, double t, long replicas, const RngSpec& rng,
                                     int jobs) {
  if (geom.site_count() > 20) throw std::invalid_argument("final_state_counts: too many sites");
  const std::size_t states = std::size_t{1} << geom.site_count();
  const int chunks = static_cast<int>(std::min<long>(replicas, 64));
  std::vector<std::vector<long>> partial(chunks, std::vector<long>(states, 0));
  parallel_for(chunks, jobs, [&](int, int c) {
    const long first = replicas * c / chunks;
    const long last = replicas * (c + 1) / chunks;
    for (long r = first; r < last; ++r) {
      const auto out = simulate(geom, b, eta0, t, RngSpec{rng.seed, rng.streamId + static_cast<std::uint64_t>(r)});
      ++partial[c][out.final.code()];
    }
  });
  std::vector<long> counts(states, 0);
  for (const auto& p : partial) {
    for (std::size_t k = 0; k < states; ++k) counts[k] += p[k];
  }
  return counts;
}

}  // namespace bdex

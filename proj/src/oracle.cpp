#include "bdex/oracle.hpp"

#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace bdex::oracle {

namespace {

// Site coordinates decoded from the documented index order; kept local so the
// oracle does not lean on LatticeGeometry.
struct Coordinates {
  int N;
  int d;
  int transverse;

  std::vector<int> decode(int k) const {
    std::vector<int> c(d);
    int rest = k % transverse;
    c[0] = k / transverse - (N - 1);
    for (int j = d - 1; j >= 1; --j) {
      c[j] = rest % N;
      rest /= N;
    }
    return c;
  }

  // Index of c, or -1 if the first coordinate is outside {-N+1..N-1}.
  int encode(std::vector<int> c) const {
    if (c[0] < -(N - 1) || c[0] > N - 1) return -1;
    int k = c[0] + N - 1;
    for (int j = 1; j < d; ++j) k = k * N + ((c[j] % N) + N) % N;
    return k;
  }

  std::vector<double> face_point(const std::vector<int>& c) const {
    std::vector<double> u;
    for (int j = 1; j < d; ++j) u.push_back(static_cast<double>(c[j]) / N);
    return u;
  }
};

int bit(std::uint64_t state, int k) { return static_cast<int>((state >> k) & 1u); }

std::uint64_t checked_state_count(int sites, int cap) {
  if (sites > cap) {
    throw StateSpaceTooLarge("state space 2^" + std::to_string(sites) + " exceeds the oracle cap 2^" +
                             std::to_string(cap));
  }
  return std::uint64_t{1} << sites;
}

}  // namespace

GeneratorMatrix build_generator(const ModelParams& params, const BoundaryProfile& b) {
  params.validate();
  Coordinates geo{params.N, params.d, 1};
  for (int j = 1; j < params.d; ++j) geo.transverse *= params.N;
  const int sites = (2 * params.N - 1) * geo.transverse;
  const std::uint64_t states = checked_state_count(sites, kMaxSites);
  const double speed = static_cast<double>(params.N) * params.N;

  GeneratorMatrix L = GeneratorMatrix::Zero(states, states);
  for (std::uint64_t from = 0; from < states; ++from) {
    for (std::uint64_t to = 0; to < states; ++to) {
      const std::uint64_t diff = from ^ to;
      const int changed = std::popcount(diff);
      double rate = 0.0;
      if (changed == 1) {
        const int k = std::countr_zero(diff);
        const auto c = geo.decode(k);
        if (std::abs(c[0]) == params.N - 1) {
          const double res = b.value(c[0] < 0 ? Face::Left : Face::Right, geo.face_point(c));
          rate = bit(from, k) ? 1.0 - res : res;
        }
      } else if (changed == 2) {
        const int k = std::countr_zero(diff);
        const int l = 63 - std::countl_zero(diff);
        // Both differing sites swap values only if their occupations differ in `from`.
        if (bit(from, k) != bit(from, l)) {
          for (int i = 0; i < params.d; ++i) {
            for (auto [x, y] : {std::pair{k, l}, std::pair{l, k}}) {
              auto cx = geo.decode(x);
              auto next = cx;
              next[i] += 1;
              if (geo.encode(next) != y) continue;
              auto behind = cx;
              behind[i] -= 1;
              auto ahead = cx;
              ahead[i] += 2;
              const int kb = geo.encode(behind);
              const int ka = geo.encode(ahead);
              const double left =
                  kb >= 0 ? bit(from, kb) : b.value(Face::Left, geo.face_point(cx));
              const double right =
                  ka >= 0 ? bit(from, ka) : b.value(Face::Right, geo.face_point(cx));
              rate += 1.0 + params.a * (left + right);
            }
          }
        }
      }
      if (rate != 0.0) L(from, to) = speed * rate;
    }
  }
  for (std::uint64_t s = 0; s < states; ++s) L(s, s) = -L.row(s).sum();
  return L;
}

GeneratorMatrix generator_from_events(const LatticeGeometry& geom, const BoundaryProfile& b) {
  const std::uint64_t states = checked_state_count(geom.site_count(), kMaxSites);
  const Reservoirs res(geom, b);
  const double speed = static_cast<double>(geom.scale()) * geom.scale();
  GeneratorMatrix L = GeneratorMatrix::Zero(states, states);
  for (std::uint64_t s = 0; s < states; ++s) {
    Configuration eta = Configuration::from_code(geom.site_count(), s);
    for (const RatedEvent& re : enumerate_events(geom, res, eta)) {
      if (!re.changesState) continue;
      Configuration next = eta;
      if (re.event.kind == Event::Kind::Exchange) {
        next.exchange(re.event.x, re.event.y);
      } else {
        next.flip(re.event.x);
      }
      L(s, next.code()) += speed * re.rate;
    }
  }
  for (std::uint64_t s = 0; s < states; ++s) L(s, s) = -L.row(s).sum();
  return L;
}

Eigen::VectorXd stationary_vector(const GeneratorMatrix& L) {
  const Eigen::Index n = L.rows();
  Eigen::MatrixXd A = L.transpose();
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd mu = lu.solve(rhs);
  const double scale = L.cwiseAbs().maxCoeff();
  const double residual = (mu.transpose() * L).cwiseAbs().maxCoeff();
  if (!mu.allFinite() || residual > 1e-12 * scale) {
    throw std::runtime_error("stationary solve failed: residual " + std::to_string(residual) +
                             " against generator scale " + std::to_string(scale));
  }
  return mu;
}

Eigen::VectorXd transient_law(const GeneratorMatrix& L, std::uint64_t initialState, double t) {
  const Eigen::Index n = L.rows();
  if (n > (Eigen::Index{1} << kMaxTransientSites)) {
    throw StateSpaceTooLarge("transient law limited to 2^" + std::to_string(kMaxTransientSites) + " states");
  }
  if (t < 0.0) throw DomainError("time must be nonnegative");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(static_cast<Eigen::Index>(initialState)) = 1.0;
  if (t == 0.0) return v;

  // p(t) = sum_k Poisson(k; lambda t) v P^k with P = I + L / lambda.
  const double lambda = (-L.diagonal()).maxCoeff();
  if (!(lambda > 0.0)) return v;
  const Eigen::MatrixXd Pt = (Eigen::MatrixXd::Identity(n, n) + L / lambda).transpose();
  const double q = lambda * t;
  const long kmax = static_cast<long>(std::ceil(q + 12.0 * std::sqrt(q) + 30.0));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (long k = 0; k <= kmax; ++k) {
    const double w = std::exp(-q + k * std::log(q) - std::lgamma(k + 1.0));
    out += w * v;
    v = Pt * v;
  }
  return out;
}

Eigen::VectorXd mean_occupation(const Eigen::VectorXd& law, int siteCount) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(siteCount);
  for (Eigen::Index s = 0; s < law.size(); ++s) {
    for (int k = 0; k < siteCount; ++k) {
      if ((s >> k) & 1) m(k) += law(s);
    }
  }
  return m;
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return 0.5 * (p - q).cwiseAbs().sum();
}

ChiSquare chi_square_test(const Eigen::VectorXd& probabilities, const std::vector<long>& counts) {
  if (static_cast<Eigen::Index>(counts.size()) != probabilities.size()) {
    throw std::invalid_argument("chi_square_test: size mismatch");
  }
  long n = 0;
  for (long c : counts) n += c;
  ChiSquare out;
  double pooledE = 0.0;
  long pooledO = 0;
  int bins = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = probabilities(static_cast<Eigen::Index>(k)) * n;
    if (e >= 5.0) {
      out.statistic += (counts[k] - e) * (counts[k] - e) / e;
      ++bins;
    } else {
      pooledE += e;
      pooledO += counts[k];
    }
  }
  if (pooledE > 0.0) {
    out.statistic += (pooledO - pooledE) * (pooledO - pooledE) / pooledE;
    ++bins;
  }
  out.dof = bins - 1;
  out.pvalue = out.dof > 0 ? boost::math::gamma_q(0.5 * out.dof, 0.5 * out.statistic) : 1.0;
  return out;
}

}  // namespace bdex::oracle

#include <doctest.h>

#include <set>
#include <tuple>
#include <vector>

#include "bdex/lattice.hpp"

using namespace bdex;

namespace {

LatticeGeometry geometry(double a, int d, int N) { return LatticeGeometry(ModelParams{a, d, N}); }

}  // namespace

TEST_CASE("model parameters are validated") {
  CHECK_THROWS_AS(ModelParams({-0.6, 1, 2}).validate(), DomainError);
  CHECK_THROWS_AS(ModelParams({-0.5, 1, 2}).validate(), DomainError);
  CHECK_THROWS_AS(ModelParams({0.0, 0, 2}).validate(), DomainError);
  CHECK_THROWS_AS(ModelParams({0.0, 1, 1}).validate(), DomainError);
  CHECK_NOTHROW(ModelParams({-0.49, 3, 2}).validate());
}

TEST_CASE("boundary profile rejects values outside (0,1)") {
  const std::vector<double> none;
  CHECK_THROWS_AS(BoundaryProfile::constant(1.2).value(Face::Left, none), DomainError);
  CHECK_THROWS_AS(BoundaryProfile::constant(0.0).value(Face::Right, none), DomainError);
  CHECK(BoundaryProfile::two_sided(0.2, 0.8).value(Face::Right, none) == 0.8);
  const auto tab = BoundaryProfile::tabulated({0.2, 0.4}, {0.6, 0.6});
  const std::vector<double> quarter{0.25};
  CHECK(tab.value(Face::Left, quarter) == doctest::Approx(0.3));
  const std::vector<double> wrap{1.25};
  CHECK(tab.value(Face::Left, wrap) == doctest::Approx(0.3));
}

TEST_CASE("geometry: site count, faces and index order") {
  for (int d = 1; d <= 3; ++d) {
    for (int N = 2; N <= 4; ++N) {
      const auto g = geometry(0.0, d, N);
      int transverse = 1;
      for (int j = 1; j < d; ++j) transverse *= N;
      CHECK(g.site_count() == (2 * N - 1) * transverse);
      CHECK(static_cast<int>(g.left_boundary().size()) == transverse);
      for (Site s : g.left_boundary()) CHECK(g.coords(s)[0] == -(N - 1));
      for (Site s : g.right_boundary()) CHECK(g.coords(s)[0] == N - 1);
      for (Site s = 0; s < g.site_count(); ++s) {
        const auto c = g.coords(s);
        CHECK(g.index(c) == s);
        // Row-major, first coordinate slowest.
        int expect = c[0] + N - 1;
        for (int j = 1; j < d; ++j) expect = expect * N + c[j];
        CHECK(expect == s);
      }
    }
  }
}

TEST_CASE("shift wraps transversally and leaves the domain along e1") {
  const auto g = geometry(0.0, 2, 3);
  const std::vector<int> corner{2, 2};
  const Site s = g.index(corner);
  CHECK_FALSE(g.shift(s, 0, 1).has_value());
  const std::vector<int> wrapped{2, 0};
  CHECK(g.shift(s, 1, 1) == g.index(wrapped));
  const std::vector<int> back{1, 2};
  CHECK(g.shift(s, 0, -1) == g.index(back));
}

TEST_CASE("bulk rate examples") {
  SUBCASE("a = 0 gives 1 on interior bonds") {
    const auto g = geometry(0.0, 1, 4);
    const Reservoirs res(g, BoundaryProfile::constant(0.3));
    auto eta = Configuration::full(g);
    for (Site x = 0; x + 1 < g.site_count(); ++x) CHECK(bulk_rate(g, res, eta, x, 0) == 1.0);
  }
  SUBCASE("a = 1 with both auxiliary sites occupied gives 3") {
    const auto g = geometry(1.0, 1, 4);
    const Reservoirs res(g, BoundaryProfile::constant(0.3));
    auto eta = Configuration::empty(g);
    const std::vector<int> c{0};
    const Site x = g.index(c);
    eta.set(x - 1, 1);
    eta.set(x + 2, 1);
    CHECK(bulk_rate(g, res, eta, x, 0) == doctest::Approx(3.0));
  }
  SUBCASE("a = 0.5 at the left face substitutes the reservoir") {
    const auto g = geometry(0.5, 1, 4);
    const Reservoirs res(g, BoundaryProfile::two_sided(0.4, 0.9));
    auto eta = Configuration::empty(g);
    const Site x = g.left_boundary()[0];
    eta.set(x + 2, 1);
    CHECK(bulk_rate(g, res, eta, x, 0) == doctest::Approx(1.7));
  }
  SUBCASE("right face substitutes b(+1)") {
    const auto g = geometry(0.5, 1, 4);
    const Reservoirs res(g, BoundaryProfile::two_sided(0.4, 0.9));
    auto eta = Configuration::empty(g);
    const Site y = g.right_boundary()[0];
    eta.set(y - 2, 1);
    CHECK(bulk_rate(g, res, eta, y - 1, 0) == doctest::Approx(1.0 + 0.5 * (1.0 + 0.9)));
  }
  SUBCASE("bond leaving the domain is rejected") {
    const auto g = geometry(0.0, 1, 3);
    const Reservoirs res(g, BoundaryProfile::constant(0.3));
    const auto eta = Configuration::empty(g);
    CHECK_THROWS_AS(bulk_rate(g, res, eta, g.right_boundary()[0], 0), DomainError);
    CHECK_THROWS_AS(bulk_rate(g, res, eta, 0, 1), DomainError);
  }
}

TEST_CASE("boundary flip rate examples") {
  const auto g = geometry(0.0, 1, 3);
  auto eta = Configuration::empty(g);
  const Site left = g.left_boundary()[0];
  const Site right = g.right_boundary()[0];
  const Reservoirs r3(g, BoundaryProfile::constant(0.3));
  const Reservoirs r5(g, BoundaryProfile::constant(0.5));
  CHECK(boundary_flip_rate(g, r3, eta, left) == doctest::Approx(0.3));
  CHECK(boundary_flip_rate(g, r5, eta, right) == doctest::Approx(0.5));
  eta.set(left, 1);
  CHECK(boundary_flip_rate(g, r3, eta, left) == doctest::Approx(0.7));
  CHECK_THROWS_AS(boundary_flip_rate(g, r3, eta, left + 1), DomainError);
}

TEST_CASE("exchange and flip are involutions with the right particle counts") {
  const auto g = geometry(0.0, 1, 3);
  auto eta = Configuration::from_code(g.site_count(), 0b00101);
  const auto swapped = apply_exchange(g, eta, 0, 1);
  CHECK(swapped[0] == 0);
  CHECK(swapped[1] == 1);
  CHECK(swapped.count() == eta.count());
  CHECK(apply_exchange(g, swapped, 0, 1) == eta);
  CHECK(apply_exchange(g, eta, 1, 3) == eta);

  const auto flipped = apply_flip(g, eta, 1);
  CHECK(flipped[1] == 1);
  CHECK(flipped.count() == eta.count() + 1);
  const auto emptied = apply_flip(g, eta, 0);
  CHECK(emptied.count() == eta.count() - 1);
  CHECK(apply_flip(g, flipped, 1) == eta);
}

TEST_CASE("configuration count stays equal to the sum of occupations") {
  const auto g = geometry(0.0, 2, 3);
  auto eta = Configuration::empty(g);
  for (int k = 0; k < 200; ++k) {
    const Site s = (k * 7) % g.site_count();
    if (k % 3 == 0) {
      eta.flip(s);
    } else {
      eta.exchange(s, (s + 5) % g.site_count());
    }
    int sum = 0;
    for (Site x = 0; x < g.site_count(); ++x) sum += eta[x];
    REQUIRE(sum == eta.count());
  }
}

TEST_CASE("enumerate_events: counting examples") {
  SUBCASE("d=1, N=2 has two bonds and two boundary sites") {
    const auto g = geometry(0.0, 1, 2);
    const Reservoirs res(g, BoundaryProfile::constant(0.3));
    const auto events = enumerate_events(g, res, Configuration::empty(g));
    CHECK(events.size() <= 4);
    CHECK(events.size() == 4);
  }
  SUBCASE("empty configuration with a = 0") {
    const auto g = geometry(0.0, 1, 3);
    const Reservoirs res(g, BoundaryProfile::two_sided(0.3, 0.6));
    for (const auto& e : enumerate_events(g, res, Configuration::empty(g))) {
      if (e.event.kind == Event::Kind::Exchange) {
        CHECK(e.rate == 1.0);
        CHECK_FALSE(e.changesState);
      } else {
        CHECK(e.rate == doctest::Approx(g.on_left_boundary(e.event.x) ? 0.3 : 0.6));
        CHECK(e.changesState);
      }
    }
  }
}

TEST_CASE("enumerate_events: d=2, N=3 bonds match a direct double loop") {
  const auto g = geometry(0.0, 2, 3);
  const Reservoirs res(g, BoundaryProfile::constant(0.4));
  std::set<std::tuple<int, int, int>> expected;
  for (int x1 = -2; x1 <= 2; ++x1) {
    for (int x2 = 0; x2 < 3; ++x2) {
      const int from = (x1 + 2) * 3 + x2;
      if (x1 + 1 <= 2) expected.insert({from, (x1 + 3) * 3 + x2, 0});
      expected.insert({from, (x1 + 2) * 3 + (x2 + 1) % 3, 1});
    }
  }
  std::set<std::tuple<int, int, int>> found;
  int flips = 0;
  for (const auto& e : enumerate_events(g, res, Configuration::empty(g))) {
    if (e.event.kind == Event::Kind::Exchange) {
      found.insert({e.event.x, e.event.y, e.event.direction});
    } else {
      ++flips;
    }
  }
  CHECK(found == expected);
  CHECK(expected.size() == 4 * 3 + 5 * 3);
  CHECK(flips == 6);
}

TEST_CASE("rates are positive and do not read the exchanged pair (exhaustive)") {
  for (double a : {-0.49, -0.2, 0.0, 0.7, 2.0}) {
    for (auto [d, N] : {std::pair{1, 2}, std::pair{1, 4}, std::pair{2, 2}, std::pair{2, 3}}) {
      const auto g = geometry(a, d, N);
      if (g.site_count() > 12) continue;
      const Reservoirs res(g, BoundaryProfile::two_sided(0.15, 0.85));
      const auto catalog = event_catalog(g);
      for (std::uint64_t code = 0; code < (std::uint64_t{1} << g.site_count()); ++code) {
        const auto eta = Configuration::from_code(g.site_count(), code);
        for (const Event& e : catalog) {
          const double r = event_rate(g, res, eta, e);
          REQUIRE(r > 0.0);
          if (e.kind == Event::Kind::Exchange) {
            const auto swapped = apply_exchange(g, eta, e.x, e.y);
            REQUIRE(bulk_rate(g, res, swapped, e.x, e.direction) == r);
          }
        }
      }
    }
  }
}

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "relucraft/capacity.hpp"
#include "relucraft/error.hpp"

using namespace relucraft::capacity;
using relucraft::InvalidInput;

namespace {

CapacityQuery query(double n, double L, double R, double dmax, double eps) {
  CapacityQuery q;
  q.n = n;
  q.L = L;
  q.R = R;
  q.d_max = dmax;
  q.epsilon = eps;
  return q;
}

}  // namespace

TEST_CASE("deep covering bound arithmetic") {
  CHECK(deep_log_covering_bound(query(10, 2, 2, 4, 0.5)).log2 == doctest::Approx(820.0));
  CHECK(deep_log_covering_bound(query(10, 2, 1, 8, 0.5)).log2 == doctest::Approx(820.0));
  const double near_one = deep_log_covering_bound(query(10, 2, 2, 4, 1.0 - 1e-12)).log2;
  CHECK(near_one == doctest::Approx(810.0));
  CHECK(deep_log_covering_bound(query(20, 2, 2, 4, 0.5)).log2 == doctest::Approx(1640.0));
  CHECK(deep_log_covering_bound(query(10, 2, 0.25, 4, 0.5)).degenerate);
  CHECK_FALSE(deep_log_covering_bound(query(10, 2, 2, 4, 0.5)).degenerate);
  CHECK_THROWS_AS(deep_log_covering_bound(query(10, 2, 2, 4, 1.0)), InvalidInput);
  CHECK_THROWS_AS(deep_log_covering_bound(query(-1, 2, 2, 4, 0.5)), InvalidInput);
}

TEST_CASE("shallow covering bound") {
  CHECK(shallow_log_covering_bound(10, 2, 1, 1).log2 == doctest::Approx(10.0));
  const auto at = shallow_log_covering_bound(10, 2, 2, 1);
  CHECK(at.log2 == 0.0);
  CHECK(at.degenerate);
  CHECK(shallow_log_covering_bound(30, 2, 0.1, 0.5).log2 == doctest::Approx(3.0 * shallow_log_covering_bound(10, 2, 0.1, 0.5).log2));
}

TEST_CASE("deep bound is increasing in every argument") {
  const CapacityQuery base = query(50, 3, 2, 20, 0.1);
  const double b0 = deep_log_covering_bound(base).log2;
  auto bumped = [&](auto f) {
    CapacityQuery q = base;
    f(q);
    return deep_log_covering_bound(q).log2;
  };
  CHECK(bumped([](CapacityQuery& q) { q.n += 1; }) > b0);
  CHECK(bumped([](CapacityQuery& q) { q.L += 1; }) > b0);
  CHECK(bumped([](CapacityQuery& q) { q.R *= 1.1; }) > b0);
  CHECK(bumped([](CapacityQuery& q) { q.d_max += 1; }) > b0);
  CHECK(bumped([](CapacityQuery& q) { q.epsilon /= 2; }) > b0);
  CHECK(bumped([](CapacityQuery& q) { q.c_dim *= 2; }) > b0);
}

TEST_CASE("iso-capacity curve") {
  CapacityQuery t = query(100, 1, 2, 10, 0.01);
  const double target = deep_log_covering_bound(t).log2;
  std::vector<int> depths;
  for (int L = 1; L <= 10; ++L) depths.push_back(L);
  const auto curve = iso_capacity_curve(target, t, depths);
  REQUIRE(curve.points.size() == 10);
  CHECK(curve.points[0].L == 1);
  CHECK(curve.points[0].n == 100);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    CapacityQuery q = t;
    q.L = curve.points[i].L;
    q.n = static_cast<double>(curve.points[i].n);
    CHECK(deep_log_covering_bound(q).log2 <= target * (1 + 1e-12));
    q.n += 1;
    CHECK(deep_log_covering_bound(q).log2 > target);
    if (i > 0) CHECK(curve.points[i].n <= curve.points[i - 1].n);
    if (i > 0 && i + 1 < curve.points.size())
      CHECK(curve.points[i + 1].n - 2 * curve.points[i].n + curve.points[i - 1].n >= -1);
  }

  // Exchange rate between consecutive depths: n(L+1)/n(L) follows
  // (L+1)^2/(L+2)^2 once the epsilon term is negligible.
  CapacityQuery flat = query(1000000, 1, 4, 16, 0.999);
  const auto fc = iso_capacity_curve(deep_log_covering_bound(flat).log2, flat, depths);
  for (std::size_t i = 0; i + 1 < fc.points.size(); ++i) {
    const double L = fc.points[i].L;
    const double ratio = static_cast<double>(fc.points[i + 1].n) / static_cast<double>(fc.points[i].n);
    CHECK(ratio == doctest::Approx((L + 1) * (L + 1) / ((L + 2) * (L + 2))).epsilon(1e-3));
  }

  const auto none = iso_capacity_curve(1.0, t, {1, 2});
  CHECK(none.points.empty());
  CHECK(none.warnings.size() == 2);

  std::ostringstream os;
  write_curve_csv(os, curve);
  CHECK(os.str().rfind("L,n,log2_bound\n1,100,", 0) == 0);
}

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "relucraft/datagen.hpp"
#include "relucraft/error.hpp"

using namespace relucraft::datagen;
using doctest::Approx;

namespace {

bool same(const Dataset& a, const Dataset& b) {
  return a.dim == b.dim && a.x == b.x && a.y == b.y && a.y_clean == b.y_clean;
}

double square_sum(std::span<const double> x, int k) {
  double s = 0.0;
  for (int j = 0; j < 10; ++j) s += j < k ? x[j] * x[j] : x[j];
  return s;
}

}  // namespace

TEST_CASE("square feature targets and domain") {
  const auto d = gen_square_feature(500, 11);
  CHECK(d.dim == 10);
  CHECK(d.size() == 500);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.row(i);
    for (double v : x) CHECK((v >= -100.0 && v <= 100.0));
    CHECK(d.y[i] == Approx(square_sum(x, 10)));
  }
  CHECK(d.meta["generator"] == "square_feature");
  CHECK(d.meta["seed"] == 11);
}

TEST_CASE("partial radial targets") {
  const auto d = gen_partial_radial(300, 4, 2);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.y[i] == Approx(square_sum(d.row(i), 4)));
  for (int k = 2; k <= 9; ++k) CHECK_NOTHROW(gen_partial_radial(1, k, 0));
  CHECK_THROWS_AS(gen_partial_radial(1, 1, 0), relucraft::InvalidInput);
  CHECK_THROWS_AS(gen_partial_radial(1, 10, 0), relucraft::InvalidInput);
}

TEST_CASE("noisy radial data") {
  CHECK(radial_clean(0.0, 0.0) == 1.0);
  const double a = std::sqrt(M_PI / 4.0);
  CHECK(radial_clean(a, a) == Approx(2.0 / M_PI));
  const auto d = gen_radial_noisy(4000, 0.1, 5);
  REQUIRE(d.y_clean);
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.row(i);
    CHECK(std::abs(x[0]) <= 1.0);
    CHECK(std::abs(x[1]) <= 1.0);
    CHECK((*d.y_clean)[i] == Approx(radial_clean(x[0], x[1])));
    mean += d.y[i] - (*d.y_clean)[i];
  }
  mean /= d.size();
  for (std::size_t i = 0; i < d.size(); ++i) var += std::pow(d.y[i] - (*d.y_clean)[i] - mean, 2) / d.size();
  CHECK(std::abs(var - 0.1) <= 0.01);
  const auto quiet = gen_radial_noisy(10, 0.0, 5);
  CHECK(quiet.y == *quiet.y_clean);
}

TEST_CASE("MMI formula") {
  const double e = std::exp(1.2655 + 0.2089 * 5 - 0.0011 * 10 - 0.2451 * std::log(10 + 2.1502 * 5));
  CHECK(mmi(5, 10) == Approx(e));
  const double t = std::exp(1.2655 + 0.2089 * 5 - 0.0011 * 10 - 0.2451 * std::log10(10 + 2.1502 * 5));
  CHECK(mmi(5, 10, LogBase::kTen) == Approx(t));
  for (double m = 4.0; m <= 8.0; m += 0.5)
    for (double dist = 1.0; dist < 200.0; dist += 7.0) {
      CHECK(mmi(m, dist + 1.0) < mmi(m, dist));
      CHECK(mmi(m + 1e-4, dist) > mmi(m, dist));
    }
  const auto d = gen_mmi(900, 1);
  CHECK(d.dim == 2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.row(i);
    CHECK((x[0] >= 4.0 && x[0] <= 8.0 && x[1] >= 1.0 && x[1] <= 200.0));
    CHECK(d.y[i] == mmi(x[0], x[1]));
  }
  CHECK_THROWS_AS(gen_mmi(10, 1, {-1.0, 2.0}), relucraft::InvalidInput);
}

TEST_CASE("same seed gives the same bytes") {
  CHECK(same(gen_square_feature(50, 9), gen_square_feature(50, 9)));
  CHECK_FALSE(same(gen_square_feature(50, 9), gen_square_feature(50, 10)));
  CHECK(same(gen_radial_noisy(50, 0.1, 9), gen_radial_noisy(50, 0.1, 9)));
  CHECK(same(generate("mmi", 30, 4, {{"log", "10"}}), gen_mmi(30, 4, {4, 8}, {1, 200}, LogBase::kTen)));
  CHECK(same(generate("partial_radial", 30, 4, {{"k", 3}}), gen_partial_radial(30, 3, 4)));
  CHECK_THROWS_AS(generate("nope", 3, 0), relucraft::InvalidInput);
  CHECK_THROWS_AS(gen_square_feature(0, 0), relucraft::InvalidInput);
}

TEST_CASE("CSV round trip") {
  for (const auto& d : {gen_radial_noisy(40, 0.1, 2), gen_square_feature(20, 3)}) {
    std::stringstream ss;
    write_csv(ss, d);
    const std::string header = ss.str().substr(0, ss.str().find('\n'));
    CHECK(header.rfind("x1,", 0) == 0);
    CHECK((header.find("y_clean") != std::string::npos) == d.y_clean.has_value());
    const auto back = read_csv(ss);
    CHECK(same(back, d));
  }
  std::stringstream bad("x1,z\n1,2\n");
  CHECK_THROWS_AS(read_csv(bad), relucraft::InvalidInput);
}

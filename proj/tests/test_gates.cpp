#include <doctest.h>

#include <cmath>
#include <numeric>

#include "relucraft/gates.hpp"
#include "support.hpp"

using namespace relucraft::gates;
using relucraft::InvalidInput;
using relucraft::netcore::count_free_params;
using relucraft::netcore::Evaluator;
using testing_support::random_points;

namespace {

double hat_ref(double x) { return x <= 0.5 ? 2 * x : 2 * (1 - x); }

// t - sum_{s<=S} g_s(t) / 4^s by direct iteration.
double sawtooth_series(double t, int levels) {
  double g = t, f = t;
  for (int s = 1; s <= levels; ++s) {
    g = hat_ref(g);
    f -= g / std::pow(4.0, s);
  }
  return f;
}

GateConfig cfg_of(double theta, int lt, double eps, int arity = 2) {
  GateConfig c;
  c.theta = theta;
  c.l_tilde = lt;
  c.epsilon = eps;
  c.arity = arity;
  return c;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(cfg_of(0.3, 2, 0.1).validate());
  CHECK_THROWS_AS(cfg_of(0.25, 2, 0.1).validate(), InvalidInput);  // needs l_tilde > 2
  CHECK_THROWS_AS(cfg_of(0.5, 2, 1.0).validate(), InvalidInput);
  CHECK_THROWS_AS(cfg_of(0.5, 2, 0.0).validate(), InvalidInput);
  CHECK_THROWS_AS(cfg_of(-1, 2, 0.1).validate(), InvalidInput);
  CHECK_THROWS_AS(product2_gate(cfg_of(0.1, 2, 0.1)), InvalidInput);
}

TEST_CASE("level bookkeeping") {
  CHECK(square_levels(0.25) == 0);
  CHECK(square_levels(0.1) == 1);
  CHECK(square_levels(0.01) == 3);
  CHECK(square_levels(1.0 / 1024) == 4);
  CHECK(level_chunks(7, 3) == std::vector<int>{3, 2, 2});
  CHECK(level_chunks(2, 5) == std::vector<int>{1, 1});
  CHECK(level_chunks(0, 3).empty());
}

TEST_CASE("sawtooth levels match the truncated series") {
  for (int m = 1; m <= 6; ++m) {
    for (int stages : {1, 2, m}) {
      auto net = square_levels_net(m, stages);
      CHECK(net.depth() == std::min(stages, m));
      Evaluator ev(net);
      double worst = 0.0;
      for (int i = 0; i <= 10000; ++i) {
        const double t = i / 10000.0;
        const double y = ev.scalar(std::span<const double>(&t, 1));
        CHECK(std::abs(y - sawtooth_series(t, m)) <= 1e-12);
        worst = std::max(worst, std::abs(y - t * t));
      }
      const double trunc = std::pow(4.0, -m - 1);
      CHECK(worst <= trunc + 1e-12);
      CHECK(worst >= 0.97 * trunc);
    }
  }
}

TEST_CASE("square gate accuracy and endpoints") {
  for (double eps : {0.2, 0.05, 1e-3, 1e-5}) {
    for (int lt : {2, 3, 5}) {
      auto net = square_gate(cfg_of(0.5, lt, eps));
      CHECK(net.depth() <= lt);
      Evaluator ev(net);
      const double zero = 0.0, one = 1.0;
      CHECK(std::abs(ev.scalar(std::span<const double>(&zero, 1))) <= eps);
      CHECK(std::abs(ev.scalar(std::span<const double>(&one, 1)) - 1.0) <= eps);
      double worst = 0.0;
      for (int i = 0; i <= 20000; ++i) {
        const double t = i / 20000.0;
        worst = std::max(worst, std::abs(ev.scalar(std::span<const double>(&t, 1)) - t * t));
      }
      CHECK(worst <= eps);
    }
  }
}

TEST_CASE("binary product gate") {
  for (double eps : {0.1, 0.01, 0.001}) {
    auto cfg = cfg_of(0.4, 2, eps);
    auto net = product2_gate(cfg);
    CHECK(net.depth() == 2 * cfg.l_tilde + 8);
    Evaluator ev(net);
    for (double x : {-2.0, -0.3, 0.0, 1.7, 2.0}) {
      const double a[2] = {0.0, x};
      CHECK(std::abs(ev.scalar(a)) <= eps);
    }
    const double ones[2] = {1.0, 1.0};
    CHECK(std::abs(ev.scalar(ones) - 1.0) <= eps);
    double worst = 0.0;
    for (const auto& p : random_points(100000, 2, -2, 2, 31)) worst = std::max(worst, std::abs(ev.scalar(p) - p[0] * p[1]));
    CHECK(worst <= eps);
  }
}

TEST_CASE("l-ary product gate") {
  for (int ell : {2, 3, 5}) {
    auto cfg = cfg_of(0.4, 2, 0.01, ell);
    auto g = productL_gate(cfg);
    CHECK(g.net.depth() == ell * (2 * cfg.l_tilde + 8));
    CHECK(g.net.input_dim() == ell);
    // Every stage reuses the same binary gate parameters.
    CHECK(count_free_params(g.net) == count_free_params(g.binary));
    Evaluator ev(g.net);
    double worst = 0.0;
    int checked = 0;
    for (const auto& u : random_points(100000, ell, -1, 1, 40 + ell)) {
      const double want = std::accumulate(u.begin(), u.end(), 1.0, std::multiplies<>());
      const double got = ev.scalar(u);
      worst = std::max(worst, std::abs(got - want));
      if (checked++ < 500) {
        auto st = g.stage_outputs(u);
        CHECK(st.size() == static_cast<std::size_t>(ell - 1));
        CHECK(std::abs(st.back() - got) <= 1e-12);
      }
    }
    CHECK(worst <= 0.01);
  }
  auto g3 = productL_gate(cfg_of(0.4, 2, 0.01, 3));
  const double ones[3] = {1, 1, 1};
  CHECK(std::abs(g3.net.eval_scalar(ones) - 1.0) <= 0.01);
  const double zmid[3] = {0.8, 0.0, -0.6};
  CHECK(std::abs(g3.net.eval_scalar(zmid)) <= 0.01);
  auto g1 = productL_gate(cfg_of(0.4, 2, 0.01, 1));
  const double h = -0.37;
  CHECK(std::abs(g1.net.eval_scalar(std::span<const double>(&h, 1)) - h) <= 1e-15);
  CHECK(g1.net.depth() == 12);
}

TEST_CASE("parameter growth stays below the trade-off exponent") {
  for (auto [theta, lt] : {std::pair{0.3, 2}, std::pair{0.25, 3}, std::pair{0.15, 4}}) {
    std::vector<double> lx, ly;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
      auto r = report(productL_gate(cfg_of(theta, lt, eps, 3)).net);
      lx.push_back(std::log(1.0 / eps));
      ly.push_back(std::log(static_cast<double>(r.free_params)));
    }
    const double slope = least_squares_slope(lx, ly);
    MESSAGE("theta=" << theta << " l_tilde=" << lt << " slope=" << slope);
    CHECK(slope <= theta + 0.15);
  }
}

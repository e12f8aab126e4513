#include <doctest.h>

#include <cmath>

#include "relucraft/polyapprox.hpp"
#include "support.hpp"

using namespace relucraft::polyapprox;
using relucraft::InvalidInput;
using relucraft::gates::GateConfig;
using relucraft::netcore::count_free_params;
using relucraft::netcore::Evaluator;
using testing_support::random_points;

namespace {

GateConfig gate_cfg(double eps, int lt = 2) {
  GateConfig c;
  c.theta = 0.4;
  c.l_tilde = lt;
  c.epsilon = eps;
  return c;
}

PolySpec make(int dim, int degree, double bound, std::vector<Term> terms) {
  PolySpec p;
  p.dim = dim;
  p.degree = degree;
  p.coeff_bound = bound;
  p.terms = std::move(terms);
  return p;
}

// Independent power-by-power oracle.
double oracle(const PolySpec& p, const std::vector<double>& x) {
  double s = 0;
  for (const auto& t : p.terms) {
    double m = t.c;
    for (std::size_t k = 0; k < x.size(); ++k) m *= std::pow(x[k], t.alpha[k]);
    s += m;
  }
  return s;
}

double sup_error(const ReluNet& net, const PolySpec& p, const std::vector<std::vector<double>>& pts) {
  Evaluator ev(net);
  double worst = 0;
  for (const auto& x : pts) worst = std::max(worst, std::abs(ev.scalar(x) - oracle(p, x)));
  return worst;
}

std::vector<std::vector<double>> grid2(int n) {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pts.push_back({-1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1)});
  return pts;
}

}  // namespace

TEST_CASE("polynomial evaluation") {
  auto p = make(2, 2, 1, {{{1, 1}, 1.0}});
  CHECK(eval_poly(p, std::vector<double>{1, 1}) == 1.0);
  auto c = make(3, 0, 1, {{{0, 0, 0}, 0.5}});
  CHECK(eval_poly(c, std::vector<double>{0.3, -0.9, 0.1}) == 0.5);
  auto q = make(2, 2, 1, {{{2, 0}, 1.0}, {{0, 1}, 1.0}});
  CHECK(eval_poly(q, std::vector<double>{0.5, 0.25}) == 0.5);
  CHECK_THROWS_AS(eval_poly(q, std::vector<double>{0.5}), InvalidInput);
}

TEST_CASE("spec validation and json") {
  CHECK_THROWS_AS(make(2, 1, 1, {{{1, 1}, 0.5}}).validate(), InvalidInput);
  CHECK_THROWS_AS(make(2, 2, 1, {{{1, 1}, 1.5}}).validate(), InvalidInput);
  CHECK_THROWS_AS(make(2, 2, 1, {{{1, 0}, 0.5}, {{1, 0}, 0.2}}).validate(), InvalidInput);
  CHECK_THROWS_AS(make(2, 2, 1, {}).validate(), InvalidInput);
  CHECK_THROWS_AS(make(2, 2, 1, {{{1}, 0.5}}).validate(), InvalidInput);
  auto p = random_poly(4, 3, 0.5, 6, 3);
  CHECK_NOTHROW(p.validate());
  auto back = poly_from_json(nlohmann::json::parse(poly_to_json(p).dump()));
  CHECK(poly_to_json(back) == poly_to_json(p));
  CHECK_THROWS_AS(poly_from_json(nlohmann::json::parse(R"({"dim":2})")), InvalidInput);
}

TEST_CASE("monomial networks") {
  auto cfg = gate_cfg(0.01);
  auto one = monomial_net({0, 0}, 3, cfg);
  for (const auto& x : random_points(200, 2, -1, 1, 1)) CHECK(std::abs(one.eval_scalar(x) - 1.0) <= 0.01);
  auto lin = monomial_net({1, 0, 0}, 3, cfg);
  for (const auto& x : random_points(500, 3, -1, 1, 2)) CHECK(std::abs(lin.eval_scalar(x) - x[0]) <= 0.01);
  auto m21 = monomial_net({2, 1}, 3, cfg);
  CHECK(m21.depth() == 3 * (2 * 2 + 8) + 1);
  Evaluator ev(m21);
  double worst = 0;
  for (const auto& x : grid2(101)) worst = std::max(worst, std::abs(ev.scalar(x) - x[0] * x[0] * x[1]));
  CHECK(worst <= 0.01);
  CHECK_THROWS_AS(monomial_net({2, 2}, 3, cfg), InvalidInput);
}

TEST_CASE("sparse polynomial networks") {
  auto cfg = gate_cfg(0.01);
  auto lin = sparse_poly_net(make(1, 1, 1, {{{1}, 1.0}}), cfg);
  for (int i = 0; i <= 100; ++i) {
    const double x = -1 + 0.02 * i;
    CHECK(std::abs(lin.net.eval_scalar(std::span<const double>(&x, 1)) - x) <= 0.01);
  }
  auto zero = sparse_poly_net(make(3, 2, 1, {{{1, 0, 1}, 0.0}, {{0, 2, 0}, 0.0}}), cfg);
  for (const auto& x : random_points(100, 3, -1, 1, 4)) CHECK(zero.net.eval_scalar(x) == 0.0);

  auto p = random_poly(10, 4, 1.0, 5, 11);
  auto pn = sparse_poly_net(p, cfg);
  CHECK(pn.net.depth() == 2 * 4 * 2 + 8 * 4 + 1);
  CHECK(pn.net.depth() == pn.depth_formula);
  CHECK(count_free_params(pn.net) == pn.params_formula);
  CHECK(sup_error(pn.net, p, random_points(10000, 10, -1, 1, 12)) <= 0.01);

  auto c0 = sparse_poly_net(make(2, 0, 1, {{{0, 0}, 0.75}}), cfg);
  CHECK(c0.net.depth() == 1);
  CHECK(c0.net.eval_scalar(std::vector<double>{0.2, 0.4}) == 0.75);
}

TEST_CASE("accuracy holds across degrees and accuracies") {
  for (int degree : {1, 2, 3}) {
    for (double eps : {0.1, 0.01, 0.001}) {
      auto p = random_poly(2, degree, 2.0, degree == 1 ? 3 : 4, 100 + degree);
      auto pn = sparse_poly_net(p, gate_cfg(eps, 3));
      CHECK(pn.net.depth() == pn.depth_formula);
      CHECK(sup_error(pn.net, p, grid2(41)) <= eps);
      CHECK(sup_error(pn.net, p, random_points(2000, 2, -1, 1, 7)) <= eps);
    }
  }
}

TEST_CASE("parameters grow by two per extra monomial at fixed gate accuracy") {
  // Fixing mu * B keeps the gate accuracy fixed while the support changes.
  auto cfg = gate_cfg(0.02);
  auto small = random_poly(3, 3, 1.0, 4, 21);
  auto large = random_poly(3, 3, 0.5, 8, 22);
  auto a = sparse_poly_net(small, cfg);
  auto b = sparse_poly_net(large, cfg);
  CHECK(a.monomial_eps == b.monomial_eps);
  // Each coefficient is read out once per sign of the exact output channel.
  CHECK(count_free_params(b.net) - count_free_params(a.net) == 8);
  CHECK(count_free_params(a.net) == count_free_params(a.gate.net) + 2 * 4);
  CHECK(a.net.param_bound() <= std::max(a.gate.net.param_bound(), 1.0));
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "grad_check.hpp"
#include "relucraft/datagen.hpp"
#include "relucraft/erm.hpp"
#include "relucraft/error.hpp"

using namespace relucraft::erm;
using relucraft::datagen::Dataset;
using doctest::Approx;

namespace {

TrainConfig config(std::vector<int> shape, std::uint64_t seed = 1) {
  TrainConfig c;
  c.shape = std::move(shape);
  c.seed = seed;
  return c;
}

Dataset linear_data(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d;
  d.dim = 2;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = u(rng), b = u(rng);
    d.x.push_back(a);
    d.x.push_back(b);
    d.y.push_back(2.0 * a - b + 0.5);
  }
  return d;
}

}  // namespace

TEST_CASE("initialization") {
  const auto cfg = config({10, 60, 60, 50, 1}, 7);
  const Mlp a = init_mlp(cfg), b = init_mlp(cfg);
  CHECK(a.flat() == b.flat());
  CHECK(a.param_count() == static_cast<std::size_t>(10 * 60 + 60 + 60 * 60 + 60 + 60 * 50 + 50 + 50 + 1));
  CHECK(init_mlp(config({10, 60, 60, 50, 1}, 8)).flat() != a.flat());
  for (const std::string scheme : {"glorot_uniform", "he_uniform"}) {
    auto c = cfg;
    c.init_scheme = scheme;
    const Mlp n = init_mlp(c);
    for (std::size_t k = 0; k < n.weights.size(); ++k) {
      const int fan_in = c.shape[k], fan_out = c.shape[k + 1];
      const double limit = scheme == "he_uniform" ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
      CHECK(n.weights[k].cwiseAbs().maxCoeff() <= limit);
      CHECK(n.weights[k].cwiseAbs().maxCoeff() > 0.5 * limit);
      CHECK(n.biases[k].isZero());
    }
  }
  CHECK_THROWS_AS(init_mlp(config({})), relucraft::InvalidInput);
  CHECK_THROWS_AS(init_mlp(config({3, 1})), relucraft::InvalidInput);
  auto bad = cfg;
  bad.init_scheme = "orthogonal";
  CHECK_THROWS_AS(init_mlp(bad), relucraft::InvalidInput);
  bad = cfg;
  bad.decay_rate = 1.5;
  CHECK_THROWS_AS(bad.validate(), relucraft::InvalidInput);
}

TEST_CASE("flat parameter vector round trip") {
  Mlp n = init_mlp(config({3, 4, 2, 1}));
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(n.param_count()), -1, 1);
  n.set_flat(v);
  CHECK(n.flat() == v);
  CHECK(n.weights[0](1, 0) == v(1));
  CHECK_THROWS_AS(n.set_flat(Eigen::VectorXd::Zero(3)), relucraft::InvalidInput);
}

TEST_CASE("gradient closed forms") {
  Mlp n = init_mlp(config({2, 3, 1}));
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 5);
  const Eigen::VectorXd fit = n.predict(x).transpose();
  const Gradient g = grad_mse(n, x, fit);
  CHECK(g.loss == 0.0);
  CHECK(g.flat().isZero());

  // f(x) = w relu(x) + b with the relu unit fixed to the identity on x > 0.
  Mlp one;
  one.weights = {Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 1.5)};
  one.biases = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, -0.25)};
  Eigen::MatrixXd xs(1, 1);
  xs << 2.0;
  Eigen::VectorXd ys(1);
  ys << 1.0;
  const Gradient h = grad_mse(one, xs, ys);
  const double r = 1.5 * 2.0 - 0.25 - 1.0;
  CHECK(h.loss == Approx(r * r));
  CHECK(h.weights[1](0, 0) == Approx(2 * r * 2.0));
  CHECK(h.biases[1](0) == Approx(2 * r));
  CHECK(h.weights[0](0, 0) == Approx(2 * r * 1.5 * 2.0));

  // relu'(0) = 0: a unit sitting at 0 passes no gradient to its weights.
  xs << 0.0;
  CHECK(grad_mse(one, xs, ys).weights[0](0, 0) == 0.0);
  CHECK_THROWS_AS(grad_mse(one, Eigen::MatrixXd(1, 0), Eigen::VectorXd(0)), relucraft::InvalidInput);
}

TEST_CASE("reverse mode matches central differences on 20 random nets") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = testing_support::gradient_check(100 + s);
    CHECK(r.params <= 200);
    CHECK(r.rel_error <= 1e-5);
  }
}

TEST_CASE("Adam update rule") {
  auto cfg = config({2, 3, 1});
  cfg.r0 = 0.01;
  Mlp n = init_mlp(cfg);
  const Eigen::VectorXd start = n.flat();
  AdamState s = adam_init(n);
  Gradient zero = grad_mse(n, Eigen::MatrixXd::Random(2, 4), Eigen::VectorXd::Zero(4));
  for (auto& w : zero.weights) w.setZero();
  for (auto& b : zero.biases) b.setZero();
  for (long t = 0; t < 50; ++t) adam_step(s, n, zero, t, cfg);
  CHECK(n.flat() == start);

  // Constant gradient: first bias-corrected step is rate * g / (|g| + 1e-8).
  Gradient c = zero;
  c.weights[0](0, 0) = 0.3;
  c.biases[1](0) = -2.0;
  AdamState s2 = adam_init(n);
  adam_step(s2, n, c, 0, cfg);
  CHECK(n.weights[0](0, 0) - start(0) == Approx(-0.01 * 0.3 / (0.3 + 1e-8)));
  CHECK(n.biases[1](0) == Approx(0.01 * 2.0 / (2.0 + 1e-8)));
  // Second step: m = 0.19 g, v = 0.001999 g^2, corrections 0.19 and 0.001999.
  const double before = n.weights[0](0, 0);
  adam_step(s2, n, c, 1, cfg);
  CHECK(n.weights[0](0, 0) - before == Approx(-0.01 * 0.3 / (0.3 + 1e-8)));
}

TEST_CASE("descent step decay") {
  auto cfg = config({1, 1, 1});
  cfg.r0 = 0.001;
  CHECK(descent_step(cfg, 0) == 0.001);
  CHECK(descent_step(cfg, 999) == 0.001);
  CHECK(descent_step(cfg, 1000) == Approx(0.95 * 0.001));
  CHECK(descent_step(cfg, 2500) == Approx(0.95 * 0.95 * 0.001));
}

TEST_CASE("truncation") {
  CHECK(truncate(0.5, 1) == 0.5);
  CHECK(truncate(-7, 1) == -1);
  CHECK(truncate(1, 1) == 1);
  CHECK_THROWS_AS(truncate(1, 0), relucraft::InvalidInput);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5), t(-1, 1);
  for (int i = 0; i < 10000; ++i) {
    const double f = u(rng), y = t(rng);
    CHECK(std::abs(truncate(f, 1.0) - y) <= std::abs(f - y));
  }
}

TEST_CASE("training fits linear data and is deterministic") {
  auto cfg = config({2, 8, 1}, 3);
  cfg.r0 = 0.01;
  cfg.iterations = 3000;
  cfg.batch_size = 0;
  cfg.history_every = 500;
  const auto tr = linear_data(200, 1), te = linear_data(50, 2);
  const RunReport a = train(cfg, tr, te);
  CHECK(a.final_train_mse <= 1e-3);
  CHECK(a.valid);
  CHECK_FALSE(a.diverged);
  CHECK(a.iterations_run == 3000);
  CHECK(a.history.front().step == 0);
  CHECK(a.history.back().step == 3000);
  CHECK(a.history.back().train_mse <= a.history.front().train_mse);
  CHECK(a.test.r2s > 0.99);

  cfg.batch_size = 32;
  cfg.iterations = 400;
  const RunReport b = train(cfg, tr, te), c = train(cfg, tr, te);
  CHECK(to_json(b).dump() == to_json(c).dump());
  CHECK_FALSE(to_json(b).contains("wall_time"));
  CHECK(to_json(b, true).contains("wall_time"));
  cfg.seed = 4;
  CHECK(to_json(train(cfg, tr, te)).dump() != to_json(b).dump());
}

TEST_CASE("non-finite loss marks the run invalid") {
  auto cfg = config({2, 4, 1});
  cfg.standardize = false;
  cfg.iterations = 10;
  auto tr = linear_data(20, 1);
  for (double& y : tr.y) y *= 1e300;
  const RunReport r = train(cfg, tr, linear_data(5, 2));
  CHECK(r.diverged);
  CHECK_FALSE(r.valid);
  CHECK(r.iterations_run == 0);
}

TEST_CASE("clean labels, truncation and baseline in reports") {
  auto cfg = config({2, 6, 1}, 5);
  cfg.iterations = 300;
  cfg.m_clip = 1.0;
  const auto tr = relucraft::datagen::gen_radial_noisy(200, 0.1, 1);
  const auto te = relucraft::datagen::gen_radial_noisy(50, 0.1, 2);
  const RunReport r = train(cfg, tr, te);
  REQUIRE(r.test_clean);
  CHECK(r.baseline_test_mse > 0.0);
  CHECK(to_json(r).contains("test_clean"));
  CHECK(to_json(r)["config"]["m_clip"] == 1.0);
  const auto back = config_from_json(to_json(r.config));
  CHECK(to_json(back) == to_json(r.config));
  CHECK_THROWS_AS(train(cfg, relucraft::datagen::gen_square_feature(10, 1), te), relucraft::InvalidInput);
}

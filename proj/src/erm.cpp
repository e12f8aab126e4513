#include "relucraft/erm.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "relucraft/error.hpp"

namespace relucraft::erm {

void TrainConfig::validate() const {
  if (shape.size() < 3) throw InvalidInput("network shape needs input, at least one hidden layer, and output");
  for (int w : shape)
    if (w < 1) throw InvalidInput("layer widths must be positive");
  if (shape.back() != 1) throw InvalidInput("output width must be 1");
  if (!(r0 > 0.0) || !std::isfinite(r0)) throw InvalidInput("initial descent step must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw InvalidInput("decay rate must lie in (0,1]");
  if (decay_step < 1) throw InvalidInput("decay step must be >= 1");
  if (iterations < 0) throw InvalidInput("iterations must be non-negative");
  if (batch_size < 0) throw InvalidInput("batch size must be non-negative (0 = full batch)");
  if (!(m_clip >= 0.0)) throw InvalidInput("truncation level must be non-negative");
  if (history_every < 1) throw InvalidInput("history interval must be >= 1");
  init_limit(init_scheme, 1, 1);
}

TrainConfig config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.shape = j.at("shape").get<std::vector<int>>();
    c.r0 = j.value("r0", c.r0);
    c.decay_rate = j.value("decay_rate", c.decay_rate);
    c.decay_step = j.value("decay_step", c.decay_step);
    c.iterations = j.value("iterations", c.iterations);
    if (j.contains("batch_size")) {
      const auto& b = j["batch_size"];
      c.batch_size = b.is_string() && b.get<std::string>() == "full" ? 0 : b.get<int>();
    }
    c.seed = j.value("seed", c.seed);
    c.m_clip = j.value("m_clip", c.m_clip);
    c.init_scheme = j.value("init_scheme", c.init_scheme);
    c.standardize = j.value("standardize", c.standardize);
    c.history_every = j.value("history_every", c.history_every);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("train config: ") + e.what());
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"shape", c.shape},
          {"r0", c.r0},
          {"decay_rate", c.decay_rate},
          {"decay_step", c.decay_step},
          {"iterations", c.iterations},
          {"batch_size", c.batch_size == 0 ? nlohmann::json("full") : nlohmann::json(c.batch_size)},
          {"seed", c.seed},
          {"m_clip", c.m_clip},
          {"init_scheme", c.init_scheme},
          {"standardize", c.standardize},
          {"history_every", c.history_every}};
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
  return n;
}

Eigen::VectorXd Mlp::flat() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(param_count()));
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    v.segment(at, weights[k].size()) = weights[k].reshaped();
    at += weights[k].size();
    v.segment(at, biases[k].size()) = biases[k];
    at += biases[k].size();
  }
  return v;
}

void Mlp::set_flat(const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != param_count()) throw InvalidInput("parameter vector has the wrong length");
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k].reshaped() = v.segment(at, weights[k].size());
    at += weights[k].size();
    biases[k] = v.segment(at, biases[k].size());
    at += biases[k].size();
  }
}

Eigen::RowVectorXd Mlp::predict(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd a = x;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k)
    a = ((weights[k] * a).colwise() + biases[k]).cwiseMax(0.0);
  return (weights.back() * a).colwise() + biases.back();
}

double init_limit(const std::string& scheme, int fan_in, int fan_out) {
  if (scheme == "glorot_uniform") return std::sqrt(6.0 / (fan_in + fan_out));
  if (scheme == "he_uniform") return std::sqrt(6.0 / fan_in);
  throw InvalidInput("unknown init scheme '" + scheme + "'");
}

Mlp init_mlp(const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Mlp net;
  for (std::size_t k = 0; k + 1 < cfg.shape.size(); ++k) {
    const int in = cfg.shape[k], out = cfg.shape[k + 1];
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = init_limit(cfg.init_scheme, in, out);
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = a * u(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return net;
}

Eigen::VectorXd Gradient::flat() const {
  Mlp shim;
  shim.weights = weights;
  shim.biases = biases;
  return shim.flat();
}

Gradient grad_mse(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index m = x.cols();
  if (m == 0 || y.size() != m) throw InvalidInput("batch must be nonempty with one target per column");
  const std::size_t layers = net.weights.size();
  std::vector<Eigen::MatrixXd> act(layers);  // act[k] = input to layer k
  act[0] = x;
  for (std::size_t k = 0; k + 1 < layers; ++k)
    act[k + 1] = ((net.weights[k] * act[k]).colwise() + net.biases[k]).cwiseMax(0.0);
  const Eigen::RowVectorXd out = (net.weights.back() * act.back()).colwise() + net.biases.back();
  const Eigen::RowVectorXd res = out - y.transpose();
  Gradient g;
  g.loss = res.squaredNorm() / static_cast<double>(m);
  if (!std::isfinite(g.loss)) throw Divergence("non-finite training loss");
  g.weights.resize(layers);
  g.biases.resize(layers);
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(m)) * res;
  for (std::size_t k = layers; k-- > 0;) {
    g.weights[k] = delta * act[k].transpose();
    g.biases[k] = delta.rowwise().sum();
    if (k == 0) break;
    // relu'(z) = 1 iff z > 0 iff the stored activation is > 0.
    delta = (net.weights[k].transpose() * delta).cwiseProduct((act[k].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

double mse_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (y.size() != x.cols() || x.cols() == 0) throw InvalidInput("batch must be nonempty with one target per column");
  return (net.predict(x) - y.transpose()).squaredNorm() / static_cast<double>(x.cols());
}

AdamState adam_init(const Mlp& net) {
  AdamState s;
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    s.m_w.push_back(Eigen::MatrixXd::Zero(net.weights[k].rows(), net.weights[k].cols()));
    s.v_w.push_back(Eigen::MatrixXd::Zero(net.weights[k].rows(), net.weights[k].cols()));
    s.m_b.push_back(Eigen::VectorXd::Zero(net.biases[k].size()));
    s.v_b.push_back(Eigen::VectorXd::Zero(net.biases[k].size()));
  }
  return s;
}

double descent_step(const TrainConfig& cfg, long step) {
  return cfg.r0 * std::pow(cfg.decay_rate, static_cast<double>(step / cfg.decay_step));
}

namespace {

template <class P>
void adam_update(P& param, P& m, P& v, const P& g, double rate, const AdamState& s, double c1, double c2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  param.array() -= rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.stabilizer);
}

}  // namespace

void adam_step(AdamState& s, Mlp& net, const Gradient& g, long step, const TrainConfig& cfg) {
  const double rate = descent_step(cfg, step);
  const double t = static_cast<double>(step + 1);
  const double c1 = 1.0 - std::pow(s.beta1, t), c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    adam_update(net.weights[k], s.m_w[k], s.v_w[k], g.weights[k], rate, s, c1, c2);
    adam_update(net.biases[k], s.m_b[k], s.v_b[k], g.biases[k], rate, s, c1, c2);
    if (!s.v_w[k].allFinite() || !s.v_b[k].allFinite() || !net.weights[k].allFinite())
      throw Divergence("non-finite optimizer state");
  }
}

double truncate(double v, double M) {
  if (!(M > 0.0)) throw InvalidInput("truncation level must be positive");
  return std::copysign(std::min(std::abs(v), M), v);
}

Eigen::MatrixXd inputs(const datagen::Dataset& d) {
  d.check();
  Eigen::MatrixXd x(d.dim, static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int k = 0; k < d.dim; ++k) x(k, static_cast<Eigen::Index>(i)) = d.x[i * d.dim + k];
  return x;
}

Eigen::VectorXd targets(const datagen::Dataset& d) {
  return Eigen::Map<const Eigen::VectorXd>(d.y.data(), static_cast<Eigen::Index>(d.y.size()));
}

namespace {

struct Scaler {
  Eigen::VectorXd mean, scale;
  double y_mean = 0.0, y_scale = 1.0;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const { return (x.colwise() - mean).array().colwise() / scale.array(); }
  Eigen::VectorXd apply_y(const Eigen::VectorXd& y) const { return (y.array() - y_mean) / y_scale; }
  Eigen::RowVectorXd undo_y(const Eigen::RowVectorXd& f) const { return (f.array() * y_scale + y_mean).matrix(); }
};

Scaler fit_scaler(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool on) {
  Scaler s;
  s.mean = Eigen::VectorXd::Zero(x.rows());
  s.scale = Eigen::VectorXd::Ones(x.rows());
  if (!on) return s;
  const double m = static_cast<double>(x.cols());
  s.mean = x.rowwise().mean();
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    const double sd = std::sqrt((x.row(k).array() - s.mean(k)).square().sum() / m);
    s.scale(k) = sd > 0.0 ? sd : 1.0;
  }
  s.y_mean = y.mean();
  const double sd = std::sqrt((y.array() - s.y_mean).square().sum() / m);
  s.y_scale = sd > 0.0 ? sd : 1.0;
  return s;
}

}  // namespace

RunReport train(const TrainConfig& cfg, const datagen::Dataset& train_set, const datagen::Dataset& test_set) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (train_set.dim != cfg.shape.front() || test_set.dim != cfg.shape.front())
    throw InvalidInput("dataset dimension does not match the network input width");
  if (train_set.size() == 0 || test_set.size() == 0) throw InvalidInput("train and test sets must be nonempty");

  const Eigen::MatrixXd x_raw = inputs(train_set);
  const Eigen::VectorXd y_raw = targets(train_set);
  const Scaler sc = fit_scaler(x_raw, y_raw, cfg.standardize);
  const Eigen::MatrixXd x = sc.apply(x_raw);
  const Eigen::VectorXd y = sc.apply_y(y_raw);
  const Eigen::Index m = x.cols();
  const Eigen::Index batch = cfg.batch_size == 0 ? m : std::min<Eigen::Index>(cfg.batch_size, m);

  RunReport rep;
  rep.config = cfg;
  Mlp net = init_mlp(cfg);
  AdamState adam = adam_init(net);
  Mlp checkpoint = net;
  auto train_mse = [&](const Mlp& n) { return mse_loss(n, x, y) * sc.y_scale * sc.y_scale; };

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = order.size();
  Eigen::MatrixXd xb(x.rows(), batch);
  Eigen::VectorXd yb(batch);

  rep.history.push_back({0, train_mse(net)});
  long step = 0;
  try {
    for (; step < cfg.iterations; ++step) {
      if (batch == m) {
        adam_step(adam, net, grad_mse(net, x, y), step, cfg);
      } else {
        for (Eigen::Index c = 0; c < batch; ++c) {
          if (cursor == order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
          }
          const Eigen::Index i = order[cursor++];
          xb.col(c) = x.col(i);
          yb(c) = y(i);
        }
        adam_step(adam, net, grad_mse(net, xb, yb), step, cfg);
      }
      if ((step + 1) % cfg.history_every == 0 || step + 1 == cfg.iterations) {
        const double loss = train_mse(net);
        if (!std::isfinite(loss)) throw Divergence("non-finite training loss");
        rep.history.push_back({step + 1, loss});
        checkpoint = net;
      }
    }
  } catch (const Divergence&) {
    rep.diverged = true;
    net = checkpoint;
  }
  rep.iterations_run = step;
  rep.final_train_mse = rep.history.back().train_mse;

  Eigen::RowVectorXd pred = sc.undo_y(net.predict(sc.apply(inputs(test_set))));
  if (cfg.m_clip > 0.0)
    for (double& v : pred) v = truncate(v, cfg.m_clip);
  std::vector<double> p(pred.begin(), pred.end());
  rep.test = metrics::compute_metrics(p, test_set.y);
  if (test_set.y_clean) rep.test_clean = metrics::compute_metrics(p, *test_set.y_clean);
  double base = 0.0;
  for (double t : test_set.y) base += (t - y_raw.mean()) * (t - y_raw.mean());
  rep.baseline_test_mse = base / static_cast<double>(test_set.size());
  rep.valid = !rep.diverged && std::isfinite(rep.final_train_mse) && std::isfinite(rep.test.mse) &&
              rep.test.mse < rep.baseline_test_mse;
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

nlohmann::json to_json(const RunReport& r, bool include_timing) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : r.history) hist.push_back({h.step, h.train_mse});
  nlohmann::json j = {{"config", to_json(r.config)},
                      {"final_train_mse", r.final_train_mse},
                      {"test", metrics::to_json(r.test)},
                      {"baseline_test_mse", r.baseline_test_mse},
                      {"history", hist},
                      {"iterations_run", r.iterations_run},
                      {"diverged", r.diverged},
                      {"valid", r.valid}};
  if (r.test_clean) j["test_clean"] = metrics::to_json(*r.test_clean);
  if (include_timing) j["wall_time"] = r.wall_time;
  return j;
}

}  // namespace relucraft::erm

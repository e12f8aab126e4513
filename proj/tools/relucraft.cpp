// relucraft: build approximation nets, check them against their targets,
// evaluate capacity bounds, generate data, train and sweep regressors.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage error, 3 verification failed,
// 4 every training run diverged.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "relucraft/capacity.hpp"
#include "relucraft/composite.hpp"
#include "relucraft/datagen.hpp"
#include "relucraft/erm.hpp"
#include "relucraft/error.hpp"
#include "relucraft/hash.hpp"
#include "relucraft/polyapprox.hpp"
#include "relucraft/smoothapprox.hpp"
#include "relucraft/sweep.hpp"

namespace {

using nlohmann::json;
using namespace relucraft;

constexpr int kOk = 0, kFailure = 1, kUsage = 2, kVerifyFailed = 3, kDivergedOnly = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

json size_report(const netcore::ReluNet& net) {
  return {{"depth", net.depth()},
          {"free_params", netcore::count_free_params(net)},
          {"param_bound", net.param_bound()},
          {"max_width", net.max_width()},
          {"nnz", net.nnz()},
          {"input_dim", net.input_dim()}};
}

// ---------------------------------------------------------------- construct

struct ConstructArgs {
  std::string kind, out = "net.json", target = "exp_neg_norm2", poly_file, spec_file;
  int arity = 2, dim = 2, l_tilde = 2, d = 4, d_prime = 3, n = 16;
  int rand_degree = 4, rand_mu = 5;
  double eps = 0.01, theta = 0.5, r = 2.0, rand_bound = 1.0;
  std::uint64_t seed = 0;
};

gates::GateConfig gate_cfg(const ConstructArgs& a) {
  gates::GateConfig c;
  c.theta = a.theta;
  c.l_tilde = a.l_tilde;
  c.epsilon = a.eps;
  c.arity = a.arity;
  return c;
}

json construct(const ConstructArgs& a) {
  json env, rep = json::object(), formula = json::object();
  netcore::ReluNet net;
  if (a.kind == "psi") {
    net = smoothapprox::psi_net();
    env["oracle"] = {{"kind", "psi"}};
    env["epsilon"] = 1e-12;
    formula["depth"] = 1;
  } else if (a.kind == "square") {
    const auto cfg = gate_cfg(a);
    net = gates::square_gate(cfg);
    env["oracle"] = {{"kind", "square"}};
    env["epsilon"] = a.eps;
    formula["depth_max"] = a.l_tilde;
    formula["levels"] = gates::square_levels(a.eps);
  } else if (a.kind == "product") {
    const auto g = gates::productL_gate(gate_cfg(a));
    net = g.net;
    env["oracle"] = {{"kind", "product"}, {"arity", a.arity}};
    env["epsilon"] = a.eps;
    formula["depth_max"] = 2 * a.arity * a.l_tilde + 8 * a.arity;
    formula["binary_free_params"] = netcore::count_free_params(g.binary);
  } else if (a.kind == "poly") {
    const polyapprox::PolySpec p = a.poly_file.empty()
                                       ? polyapprox::random_poly(a.dim, a.rand_degree, a.rand_bound, a.rand_mu, a.seed)
                                       : polyapprox::poly_from_json(read_json(a.poly_file));
    const auto pn = polyapprox::sparse_poly_net(p, gate_cfg(a));
    net = pn.net;
    env["oracle"] = {{"kind", "poly"}, {"poly", polyapprox::poly_to_json(p)}};
    env["epsilon"] = a.eps;
    formula["depth"] = pn.depth_formula;
    formula["free_params"] = pn.params_formula;
  } else if (a.kind == "smooth") {
    const auto f = smoothapprox::make_target(a.target, a.dim, a.r);
    const auto sn = smoothapprox::smooth_net(f, a.eps, gate_cfg(a));
    net = sn.net;
    env["oracle"] = {{"kind", "smooth"}, {"target", a.target}, {"dim", a.dim}, {"r", a.r}};
    env["epsilon"] = a.eps;
    formula["depth"] = sn.depth_formula;
    rep["grid_nodes_per_axis"] = sn.N + 1;
    rep["gate_accuracy"] = sn.nu;
    rep["branches"] = sn.branches;
    rep["params_by_part"] = {{"gate", sn.gate_params}, {"bump", sn.bump_params}, {"coeff", sn.coeff_params}};
    rep["derivative_bound"] = sn.b_tilde;
    rep["max_abs_coeff"] = sn.max_abs_coeff;
  } else if (a.kind == "composite") {
    if (a.spec_file.empty()) throw UsageError("composite needs --spec");
    const json doc = read_json(a.spec_file);
    const auto spec = composite::composite_from_json(doc);
    const auto cn = composite::composite_net(spec, a.eps, gate_cfg(a));
    net = cn.net;
    env["oracle"] = {{"kind", "composite"}, {"spec", doc}};
    env["epsilon"] = a.eps;
    formula["depth"] = cn.depth_formula;
    rep["params_by_part"] = {{"inner", cn.inner_params}, {"junction", cn.junction_params}, {"outer", cn.outer_params}};
    rep["inner_accuracy"] = cn.nu_inner;
  } else if (a.kind == "radial" || a.kind == "partial-radial") {
    const bool full = a.kind == "radial";
    const int dp = full ? a.d : a.d_prime;
    const auto g = smoothapprox::make_target(a.target, a.d - dp + 1, a.r);
    const auto rn = composite::partial_radial_net(g, a.d, dp, a.n);
    net = rn.built.net;
    env["oracle"] = {{"kind", "partial-radial"}, {"target", a.target}, {"r", a.r}, {"d", a.d}, {"d_prime", dp}};
    env["epsilon"] = rn.eps;
    formula["depth"] = rn.built.depth_formula;
    formula["printed_depth"] = rn.printed_depth;
    rep["params_by_part"] = {
        {"inner", rn.built.inner_params}, {"junction", rn.built.junction_params}, {"outer", rn.built.outer_params}};
  } else {
    throw UsageError("unknown construct kind '" + a.kind + "'");
  }
  json size = size_report(net);
  size.update(rep);
  env["kind"] = a.kind;
  env["report"] = {{"realized", size}, {"formula", formula}};
  env["net"] = netcore::to_json(net);
  return env;
}

// ------------------------------------------------------------------- verify

struct Oracle {
  int dim = 1;
  double lo = -1.0, hi = 1.0;
  std::function<double(std::span<const double>)> f;
};

Oracle make_oracle(const json& o, int net_dim) {
  const std::string kind = o.at("kind").get<std::string>();
  Oracle out;
  out.dim = net_dim;
  if (kind == "psi") {
    out.lo = -3.0;
    out.hi = 3.0;
    out.f = [](std::span<const double> x) { return smoothapprox::psi(x[0]); };
  } else if (kind == "square") {
    out.lo = 0.0;
    out.f = [](std::span<const double> x) { return x[0] * x[0]; };
  } else if (kind == "product") {
    out.f = [](std::span<const double> x) {
      double p = 1.0;
      for (double v : x) p *= v;
      return p;
    };
  } else if (kind == "zero") {
    out.f = [](std::span<const double>) { return 0.0; };
  } else if (kind == "poly") {
    auto p = polyapprox::poly_from_json(o.at("poly"));
    out.f = [p](std::span<const double> x) { return polyapprox::eval_poly(p, x); };
  } else if (kind == "smooth") {
    auto t = smoothapprox::make_target(o.at("target").get<std::string>(), o.at("dim").get<int>(), o.at("r").get<double>());
    out.f = [t](std::span<const double> x) { return t(x); };
  } else if (kind == "composite") {
    auto s = composite::composite_from_json(o.at("spec"));
    out.f = [s](std::span<const double> x) { return composite::eval_composite(s, x); };
  } else if (kind == "partial-radial") {
    const int d = o.at("d").get<int>(), dp = o.at("d_prime").get<int>();
    auto g = smoothapprox::make_target(o.at("target").get<std::string>(), d - dp + 1, o.at("r").get<double>());
    auto s = composite::partial_radial_spec(g, d, dp);
    out.f = [s](std::span<const double> x) { return composite::eval_composite(s, x); };
  } else {
    throw UsageError("unknown oracle '" + kind + "'");
  }
  return out;
}

int verify(const std::string& net_file, std::string oracle_name, double eps, int samples, const std::string& mode,
           std::uint64_t seed, const std::string& out) {
  const json doc = read_json(net_file);
  const bool envelope = doc.contains("net");
  const auto net = netcore::from_json(envelope ? doc["net"] : doc);
  json oracle_doc;
  if (!oracle_name.empty())
    oracle_doc = oracle_name == "poly" || oracle_name == "smooth" || oracle_name == "composite" ||
                         oracle_name == "partial-radial"
                     ? doc.at("oracle")
                     : json{{"kind", oracle_name}};
  else if (envelope && doc.contains("oracle"))
    oracle_doc = doc["oracle"];
  else
    throw UsageError("no oracle given and the net file does not name one");
  if (std::isnan(eps)) {
    if (!envelope || !doc.contains("epsilon")) throw UsageError("no --eps given and the net file does not declare one");
    eps = doc["epsilon"].get<double>();
  }
  const Oracle o = make_oracle(oracle_doc, net.input_dim());
  if (oracle_doc["kind"] == "psi" && net.input_dim() != 1) throw UsageError("psi oracle needs a one-input net");
  if (samples < 1) throw UsageError("--samples must be positive");
  if (mode != "grid" && mode != "random") throw UsageError("--mode must be grid or random");

  netcore::Evaluator ev(net);
  std::vector<double> x(static_cast<std::size_t>(o.dim));
  double max_err = 0.0, sum_err = 0.0;
  std::vector<double> worst;
  std::size_t count = 0;
  auto visit = [&] {
    const double e = std::abs(ev.scalar(x) - o.f(x));
    if (count == 0 || e > max_err) {
      max_err = e;
      worst = x;
    }
    sum_err += e;
    ++count;
  };
  if (mode == "random") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(o.lo, o.hi);
    for (int i = 0; i < samples; ++i) {
      for (double& v : x) v = u(rng);
      visit();
    }
  } else {
    const int per = std::max(2, static_cast<int>(std::floor(std::pow(samples, 1.0 / o.dim) + 1e-9)));
    std::vector<int> idx(static_cast<std::size_t>(o.dim), 0);
    for (;;) {
      for (int k = 0; k < o.dim; ++k) x[k] = o.lo + (o.hi - o.lo) * idx[k] / (per - 1);
      visit();
      int k = 0;
      while (k < o.dim && ++idx[k] == per) idx[k++] = 0;
      if (k == o.dim) break;
    }
  }
  const bool pass = max_err <= eps;
  const json rep = {{"max_abs_error", max_err}, {"mean_abs_error", sum_err / static_cast<double>(count)},
                    {"worst_point", worst}, {"points", count}, {"mode", mode}, {"seed", seed},
                    {"epsilon", eps}, {"pass", pass}};
  write_text(out, rep.dump(2) + "\n");
  return pass ? kOk : kVerifyFailed;
}

// -------------------------------------------------------------------- train

erm::TrainConfig train_config(const std::string& file, const std::vector<int>& hidden, int input_dim, const json& overrides) {
  json j = file.empty() ? json::object() : read_json(file);
  j.update(overrides);
  if (!hidden.empty()) {
    std::vector<int> shape{input_dim};
    shape.insert(shape.end(), hidden.begin(), hidden.end());
    shape.push_back(1);
    j["shape"] = shape;
  }
  if (!j.contains("shape")) throw UsageError("network shape missing: pass --hidden or a config with shape");
  return erm::config_from_json(j);
}

datagen::Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open " + path);
  return datagen::read_csv(is);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constructive ReLU approximation, capacity bounds and ERM experiments"};
  app.require_subcommand(1);

  ConstructArgs ca;
  auto* con = app.add_subcommand("construct", "Build a network and report its size next to the formula values");
  con->add_option("kind", ca.kind, "psi|square|product|poly|smooth|composite|radial|partial-radial")->required();
  con->add_option("--out", ca.out, "Network JSON output (- for stdout)");
  con->add_option("--eps", ca.eps, "Target accuracy");
  con->add_option("--theta", ca.theta, "Gate trade-off exponent");
  con->add_option("--ltilde", ca.l_tilde, "Square-gate layer budget");
  con->add_option("--arity", ca.arity, "Product arity");
  con->add_option("--dim", ca.dim, "Input dimension (poly, smooth)");
  con->add_option("--target", ca.target, "Named smooth target");
  con->add_option("--r", ca.r, "Smoothness");
  con->add_option("--poly", ca.poly_file, "Polynomial JSON (poly)");
  con->add_option("--degree", ca.rand_degree, "Random polynomial degree (poly without --poly)");
  con->add_option("--mu", ca.rand_mu, "Random polynomial sparsity");
  con->add_option("--bound", ca.rand_bound, "Random polynomial coefficient bound");
  con->add_option("--seed", ca.seed, "Random polynomial seed");
  con->add_option("--spec", ca.spec_file, "Composite spec JSON");
  con->add_option("--d", ca.d, "Input dimension (radial kinds)");
  con->add_option("--d-prime", ca.d_prime, "Radial block size (partial-radial)");
  con->add_option("--n", ca.n, "Parameter budget (radial kinds)");

  std::string v_net, v_oracle, v_mode = "random", v_out;
  double v_eps = NAN;
  int v_samples = 10000;
  std::uint64_t v_seed = 0;
  auto* ver = app.add_subcommand("verify", "Compare a network against a reference function");
  ver->add_option("net", v_net, "Network JSON from construct, or a bare network")->required();
  ver->add_option("--oracle", v_oracle, "psi|square|product|zero (default: the one recorded by construct)");
  ver->add_option("--eps", v_eps, "Accepted max error (default: the recorded accuracy)");
  ver->add_option("--samples", v_samples, "Number of points");
  ver->add_option("--mode", v_mode, "grid or random")->check(CLI::IsMember({"grid", "random"}));
  ver->add_option("--seed", v_seed, "Sampling seed");
  ver->add_option("--out", v_out, "Report file (default stdout)");

  capacity::CapacityQuery cq;
  double c_target = NAN;
  std::string c_out;
  std::vector<int> c_depths;
  auto* cap = app.add_subcommand("capacity", "Covering-number bounds and iso-capacity curves");
  cap->add_option("--n", cq.n, "Free parameters");
  cap->add_option("--L", cq.L, "Depth");
  cap->add_option("--R", cq.R, "Parameter bound");
  cap->add_option("--d-max", cq.d_max, "Maximal width");
  cap->add_option("--eps", cq.epsilon, "Covering radius");
  cap->add_option("--c-dim", cq.c_dim, "Dimension constant");
  cap->add_option("--curve-target", c_target, "log2 capacity level; emits the (L, n) curve as CSV");
  cap->add_option("--depths", c_depths, "Depths for the curve")->delimiter(',');
  cap->add_option("--out", c_out, "Output file (default stdout)");

  std::string g_name, g_params = "{}", g_out;
  std::size_t g_m = 0;
  std::uint64_t g_seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  gen->add_option("generator", g_name, "square_feature|partial_radial|radial_noisy|mmi")->required();
  gen->add_option("--m", g_m, "Sample count")->required();
  gen->add_option("--seed", g_seed, "Seed");
  gen->add_option("--params", g_params, "Generator parameters as JSON");
  gen->add_option("--out", g_out, "CSV file (default stdout)");

  std::string t_config, t_train, t_test, t_out, t_generator, t_params = "{}";
  std::vector<int> t_hidden;
  std::size_t t_train_size = 0, t_test_size = 0;
  std::optional<int> t_iterations, t_batch;
  std::optional<std::uint64_t> t_seed;
  std::optional<double> t_r0;
  bool t_timing = false;
  auto* tr = app.add_subcommand("train", "Train one regressor and write its report");
  tr->add_option("--config", t_config, "TrainConfig JSON");
  tr->add_option("--hidden", t_hidden, "Hidden widths, e.g. 60,60,60")->delimiter(',');
  tr->add_option("--train", t_train, "Training CSV");
  tr->add_option("--test", t_test, "Test CSV");
  tr->add_option("--generator", t_generator, "Generate data instead of reading CSV");
  tr->add_option("--params", t_params, "Generator parameters as JSON");
  tr->add_option("--train-size", t_train_size, "Generated training samples");
  tr->add_option("--test-size", t_test_size, "Generated test samples");
  tr->add_option("--iterations", t_iterations, "Override iterations");
  tr->add_option("--batch-size", t_batch, "Override batch size (0 = full)");
  tr->add_option("--seed", t_seed, "Override seed");
  tr->add_option("--r0", t_r0, "Override initial descent step");
  tr->add_flag("--timing", t_timing, "Include wall time in the report");
  tr->add_option("--out", t_out, "Report file (default stdout)");

  std::string s_manifest, s_out;
  int s_jobs = 1;
  auto* sw = app.add_subcommand("sweep", "Run a manifest of seeded training trials");
  sw->add_option("manifest", s_manifest, "Manifest JSON")->required();
  sw->add_option("--out", s_out, "Output directory (default: manifest output_dir)");
  sw->add_option("--jobs", s_jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*con) {
      const json env = construct(ca);
      write_text(ca.out, env.dump() + "\n");
      std::cout << env["report"].dump(2) << "\n";
      return kOk;
    }
    if (*ver) return verify(v_net, v_oracle, v_eps, v_samples, v_mode, v_seed, v_out);
    if (*cap) {
      if (std::isnan(c_target)) {
        const auto deep = capacity::deep_log_covering_bound(cq);
        const auto shallow = capacity::shallow_log_covering_bound(cq.n, cq.R, cq.epsilon);
        const json j = {{"deep_log2", deep.log2}, {"deep_degenerate", deep.degenerate},
                        {"shallow_log2", shallow.log2}, {"shallow_degenerate", shallow.degenerate}};
        write_text(c_out, j.dump(2) + "\n");
        return kOk;
      }
      if (c_depths.empty())
        for (int L = 1; L <= 20; ++L) c_depths.push_back(L);
      const auto curve = capacity::iso_capacity_curve(c_target, cq, c_depths);
      for (const auto& w : curve.warnings) std::cerr << "warning: " << w << "\n";
      std::ostringstream os;
      capacity::write_curve_csv(os, curve);
      write_text(c_out, os.str());
      return kOk;
    }
    if (*gen) {
      const auto d = datagen::generate(g_name, g_m, g_seed, json::parse(g_params));
      std::ostringstream os;
      datagen::write_csv(os, d);
      write_text(g_out, os.str());
      return kOk;
    }
    if (*tr) {
      datagen::Dataset train, test;
      if (!t_generator.empty()) {
        if (t_train_size == 0 || t_test_size == 0) throw UsageError("--train-size and --test-size are required with --generator");
        const json p = json::parse(t_params);
        const std::uint64_t base = t_seed.value_or(0);
        train = datagen::generate(t_generator, t_train_size, Hasher("train-data").add(base).value(), p);
        test = datagen::generate(t_generator, t_test_size, Hasher("test-data").add(base).value(), p);
      } else {
        if (t_train.empty() || t_test.empty()) throw UsageError("pass --train and --test, or --generator");
        train = load_csv(t_train);
        test = load_csv(t_test);
      }
      json over = json::object();
      if (t_iterations) over["iterations"] = *t_iterations;
      if (t_batch) over["batch_size"] = *t_batch;
      if (t_seed) over["seed"] = *t_seed;
      if (t_r0) over["r0"] = *t_r0;
      const auto cfg = train_config(t_config, t_hidden, train.dim, over);
      const auto rep = erm::train(cfg, train, test);
      write_text(t_out, erm::to_json(rep, t_timing).dump(2) + "\n");
      return rep.diverged ? kDivergedOnly : kOk;
    }
    if (*sw) {
      const json doc = read_json(s_manifest);
      const auto m = sweep::manifest_from_json(doc);
      std::string dir = s_out.empty() ? doc.value("output_dir", std::string()) : s_out;
      if (dir.empty()) throw UsageError("no output directory: pass --out or set output_dir");
      const auto res = sweep::run_sweep(m, s_jobs);
      sweep::write_outputs(dir, m, res);
      std::size_t crashed = 0, valid = 0;
      for (const auto& t : res.trials) {
        crashed += !t.report;
        valid += t.report && t.report->valid;
      }
      std::cerr << m.name << " [" << m.hash_hex() << "]: " << res.trials.size() << " runs, " << valid << " valid, " << crashed
                << " crashed -> " << dir << "\n";
      return res.divergence_only() ? kDivergedOnly : kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

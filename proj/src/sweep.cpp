#include "relucraft/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include "relucraft/datagen.hpp"
#include "relucraft/error.hpp"
#include "relucraft/hash.hpp"

namespace relucraft::sweep {

std::string Manifest::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

using nlohmann::json;

erm::TrainConfig make_config(const json& base, const json& over, const std::vector<int>& hidden, int input_dim) {
  json j = base;
  for (const auto& [k, v] : over.items())
    if (k != "hidden" && k != "depths" && k != "widths") j[k] = v;
  std::vector<int> shape{input_dim};
  shape.insert(shape.end(), hidden.begin(), hidden.end());
  shape.push_back(1);
  j["shape"] = shape;
  return erm::config_from_json(j);
}

}  // namespace

Manifest manifest_from_json(const json& j) {
  try {
    Manifest m;
    m.source = j;
    m.hash = Hasher("manifest").add(j.dump()).value();
    m.name = j.value("name", std::string("sweep"));
    m.seed = j.value("seed", std::uint64_t{0});
    m.trials = j.value("trials", 1);
    if (m.trials < 1) throw InvalidInput("manifest needs at least one trial");
    const auto& d = j.at("data");
    m.data.generator = d.at("generator").get<std::string>();
    m.data.params = d.value("params", json::object());
    m.data.train_size = d.at("train_size").get<std::size_t>();
    m.data.test_size = d.at("test_size").get<std::size_t>();
    if (m.data.train_size < 1 || m.data.test_size < 1) throw InvalidInput("train and test sizes must be positive");
    const int dim = datagen::generate(m.data.generator, 1, 0, m.data.params).dim;
    m.select_by = j.value("select_by", m.select_by);
    if (m.select_by != "mse" && m.select_by != "clean_mse") throw InvalidInput("select_by must be mse or clean_mse");

    const json base = j.value("train", json::object());
    if (base.contains("shape")) throw InvalidInput("train.shape is set per config");
    if (j.contains("configs"))
      for (const auto& c : j["configs"]) m.configs.push_back(make_config(base, c, c.at("hidden").get<std::vector<int>>(), dim));
    std::vector<json> grids;
    if (j.contains("grid")) grids.push_back(j["grid"]);
    if (j.contains("grids"))
      for (const auto& g : j["grids"]) grids.push_back(g);
    for (const auto& g : grids) {
      for (int depth : g.at("depths").get<std::vector<int>>())
        for (int width : g.at("widths").get<std::vector<int>>()) {
          if (depth < 1) throw InvalidInput("grid depths must be >= 1");
          m.configs.push_back(make_config(base, g, std::vector<int>(static_cast<std::size_t>(depth), width), dim));
        }
    }
    if (m.configs.empty()) throw InvalidInput("manifest has an empty trial list");
    return m;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("manifest: ") + e.what());
  }
}

std::uint64_t data_seed(const Manifest& m, int trial, bool test) {
  return Hasher(test ? "test-data" : "train-data").add(m.seed).add(static_cast<std::uint64_t>(trial)).value();
}

std::uint64_t train_seed(const Manifest& m, std::size_t config, int trial) {
  return Hasher("init").add(m.seed).add(config).add(static_cast<std::uint64_t>(trial)).value();
}

bool SweepResult::divergence_only() const {
  return std::none_of(trials.begin(), trials.end(), [](const TrialResult& t) { return t.report && !t.report->diverged; });
}

namespace {

double select_value(const erm::RunReport& r, const std::string& by) {
  if (by == "clean_mse") {
    if (!r.test_clean) throw InvalidInput("select_by clean_mse needs a generator with clean targets");
    return r.test_clean->mse;
  }
  return r.test.mse;
}

double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  return v.empty() ? NAN : metrics::lower_median(std::move(v));
}

}  // namespace

SweepResult run_sweep(const Manifest& m, int jobs) {
  if (jobs < 1) throw InvalidInput("worker count must be >= 1");
  std::vector<std::pair<datagen::Dataset, datagen::Dataset>> data;
  for (int t = 0; t < m.trials; ++t)
    data.emplace_back(datagen::generate(m.data.generator, m.data.train_size, data_seed(m, t, false), m.data.params),
                      datagen::generate(m.data.generator, m.data.test_size, data_seed(m, t, true), m.data.params));

  SweepResult out;
  const std::size_t n = m.configs.size() * static_cast<std::size_t>(m.trials);
  out.trials.resize(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      TrialResult& r = out.trials[i];
      r.config = i / static_cast<std::size_t>(m.trials);
      r.trial = static_cast<int>(i % static_cast<std::size_t>(m.trials));
      r.seed = train_seed(m, r.config, r.trial);
      erm::TrainConfig cfg = m.configs[r.config];
      cfg.seed = r.seed;
      try {
        const auto& [train, test] = data[static_cast<std::size_t>(r.trial)];
        r.report = erm::train(cfg, train, test);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < std::min<int>(jobs, static_cast<int>(n)); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::map<int, DepthSummary> by_depth;
  std::map<int, std::pair<std::size_t, std::size_t>> valid_counts;
  for (std::size_t c = 0; c < m.configs.size(); ++c) {
    ConfigSummary s;
    s.config = c;
    s.depth = m.configs[c].depth();
    s.hidden.assign(m.configs[c].shape.begin() + 1, m.configs[c].shape.end() - 1);
    std::vector<metrics::MetricsReport> test, clean;
    std::vector<double> train, sel;
    for (int t = 0; t < m.trials; ++t) {
      const auto& r = out.trials[c * static_cast<std::size_t>(m.trials) + static_cast<std::size_t>(t)].report;
      if (!r) continue;
      ++s.completed;
      s.valid += r->valid;
      s.diverged += r->diverged;
      test.push_back(r->test);
      if (r->test_clean) clean.push_back(*r->test_clean);
      train.push_back(r->final_train_mse);
      sel.push_back(select_value(*r, m.select_by));
    }
    if (!test.empty()) s.test = metrics::summarize(test);
    if (!clean.empty()) s.clean = metrics::summarize(clean);
    double sum = 0.0;
    std::size_t finite = 0;
    for (double v : train)
      if (std::isfinite(v)) sum += v, ++finite;
    s.train_mse_mean = finite ? sum / static_cast<double>(finite) : NAN;
    s.train_mse_median = median_of(train);
    s.select_median = median_of(sel);

    auto& vc = valid_counts[s.depth];
    vc.first += s.valid;
    vc.second += static_cast<std::size_t>(m.trials);
    auto [it, fresh] = by_depth.try_emplace(s.depth);
    DepthSummary& d = it->second;
    if (fresh || (std::isfinite(s.select_median) && !(d.best_select_median <= s.select_median))) {
      d.depth = s.depth;
      d.best_config = c;
      d.best_select_median = s.select_median;
    }
    out.configs.push_back(std::move(s));
  }
  for (auto& [depth, d] : by_depth) {
    const auto& vc = valid_counts[depth];
    d.valid_rate = static_cast<double>(vc.first) / static_cast<double>(vc.second);
    out.depths.push_back(d);
  }
  return out;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string widths(const std::vector<int>& h) {
  std::string s;
  for (std::size_t k = 0; k < h.size(); ++k) s += (k ? "-" : "") + std::to_string(h[k]);
  return s;
}

constexpr const char* kMetricNames[] = {"mse", "mae", "mdae_paper", "mdae_standard", "r2s", "evs_paper", "evs_standard"};

std::vector<double> metric_values(const metrics::MetricsReport& r) {
  return {r.mse, r.mae, r.mdae_paper, r.mdae_standard, r.r2s, r.evs_paper, r.evs_standard};
}

std::ofstream open(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + p.string());
  return os;
}

}  // namespace

void write_outputs(const std::filesystem::path& dir, const Manifest& m, const SweepResult& r) {
  std::filesystem::create_directories(dir);
  const std::string tag = m.hash_hex() + "," + std::to_string(m.seed);
  {
    auto os = open(dir / "manifest.json");
    os << m.source.dump(2) << "\n";
  }
  {
    auto os = open(dir / "runs.jsonl");
    for (const auto& t : r.trials) {
      const auto& cfg = m.configs[t.config];
      nlohmann::json j = {{"manifest_hash", m.hash_hex()},
                          {"manifest_seed", m.seed},
                          {"config", t.config},
                          {"trial", t.trial},
                          {"seed", t.seed},
                          {"data_seed", {data_seed(m, t.trial, false), data_seed(m, t.trial, true)}},
                          {"depth", cfg.depth()}};
      if (t.report)
        j["report"] = erm::to_json(*t.report);
      else
        j["error"] = t.error;
      os << j.dump() << "\n";
    }
  }
  const bool has_clean = std::any_of(r.configs.begin(), r.configs.end(), [](const ConfigSummary& c) { return c.clean.has_value(); });
  {
    auto os = open(dir / "summary.csv");
    os << "manifest_hash,seed,config,depth,widths,trials,completed,valid,valid_rate,diverged,train_mse_mean,train_mse_median";
    for (const char* prefix : {"test", "clean"}) {
      if (std::string(prefix) == "clean" && !has_clean) continue;
      for (const char* name : kMetricNames) os << "," << prefix << "_" << name << "_mean," << prefix << "_" << name << "_median";
    }
    os << ",select_median\n";
    for (const auto& c : r.configs) {
      os << tag << "," << c.config << "," << c.depth << "," << widths(c.hidden) << "," << m.trials << "," << c.completed << ","
         << c.valid << "," << num(static_cast<double>(c.valid) / m.trials) << "," << c.diverged << "," << num(c.train_mse_mean)
         << "," << num(c.train_mse_median);
      auto emit = [&](const std::optional<metrics::MetricsSummary>& s) {
        const auto mean = s ? metric_values(s->mean) : std::vector<double>(7, NAN);
        const auto med = s ? metric_values(s->median) : std::vector<double>(7, NAN);
        for (std::size_t k = 0; k < mean.size(); ++k) os << "," << num(mean[k]) << "," << num(med[k]);
      };
      emit(c.completed ? std::optional(c.test) : std::nullopt);
      if (has_clean) emit(c.clean);
      os << "," << num(c.select_median) << "\n";
    }
  }
  {
    auto os = open(dir / "by_depth.csv");
    os << "manifest_hash,seed,depth,best_config,best_widths,best_" << m.select_by << "_median,valid_rate\n";
    for (const auto& d : r.depths)
      os << tag << "," << d.depth << "," << d.best_config << "," << widths(r.configs[d.best_config].hidden) << ","
         << num(d.best_select_median) << "," << num(d.valid_rate) << "\n";
  }
}

}  // namespace relucraft::sweep

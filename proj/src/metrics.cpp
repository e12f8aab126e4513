#include "relucraft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relucraft/error.hpp"

namespace relucraft::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Null for NaN so the JSON stays valid.
nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

double lower_median(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of an empty list");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

MetricsReport compute_metrics(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw InvalidInput("predictions and targets differ in length");
  if (targets.empty()) throw InvalidInput("metrics need at least one point");
  const std::size_t m = targets.size();
  MetricsReport r;
  r.n_points = m;
  double ybar = 0.0, rbar = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ybar += targets[i];
    rbar += targets[i] - predictions[i];
  }
  ybar /= m;
  rbar /= m;
  double sse = 0.0, sae = 0.0, sst = 0.0, syy = 0.0, svr = 0.0;
  std::vector<double> abs_res(m), abs_dev(m);
  const double ymed = lower_median(std::vector<double>(targets.begin(), targets.end()));
  for (std::size_t i = 0; i < m; ++i) {
    const double e = targets[i] - predictions[i];
    sse += e * e;
    sae += std::abs(e);
    sst += (targets[i] - ybar) * (targets[i] - ybar);
    syy += targets[i] * targets[i];
    svr += (e - rbar) * (e - rbar);
    abs_res[i] = std::abs(e);
    abs_dev[i] = std::abs(predictions[i] - ymed);
  }
  r.mse = sse / m;
  r.mae = sae / m;
  r.mdae_standard = lower_median(std::move(abs_res));
  r.mdae_paper = lower_median(std::move(abs_dev));
  r.r2s_defined = sst > 0.0;
  r.r2s = r.r2s_defined ? 1.0 - sse / sst : kNaN;
  r.evs_paper_defined = syy > 0.0;
  r.evs_paper = r.evs_paper_defined ? 1.0 - sse / syy : kNaN;
  r.evs_standard_defined = sst > 0.0;
  r.evs_standard = r.evs_standard_defined ? 1.0 - svr / sst : kNaN;
  return r;
}

nlohmann::json to_json(const MetricsReport& m) {
  return {{"mse", number(m.mse)},
          {"mae", number(m.mae)},
          {"mdae_paper", number(m.mdae_paper)},
          {"mdae_standard", number(m.mdae_standard)},
          {"r2s", number(m.r2s)},
          {"evs_paper", number(m.evs_paper)},
          {"evs_standard", number(m.evs_standard)},
          {"n_points", m.n_points}};
}

MetricsSummary summarize(std::span<const MetricsReport> reports) {
  MetricsSummary s;
  s.count = reports.size();
  if (reports.empty()) return s;
  auto field = [&](double MetricsReport::*f, double& mean, double& median) {
    std::vector<double> v;
    for (const auto& r : reports)
      if (std::isfinite(r.*f)) v.push_back(r.*f);
    if (v.empty()) {
      mean = median = kNaN;
      return;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    mean = sum / v.size();
    median = lower_median(std::move(v));
  };
  for (auto f : {&MetricsReport::mse, &MetricsReport::mae, &MetricsReport::mdae_paper, &MetricsReport::mdae_standard,
                 &MetricsReport::r2s, &MetricsReport::evs_paper, &MetricsReport::evs_standard})
    field(f, s.mean.*f, s.median.*f);
  s.mean.n_points = s.median.n_points = reports.front().n_points;
  s.mean.r2s_defined = s.median.r2s_defined = std::isfinite(s.mean.r2s);
  s.mean.evs_paper_defined = s.median.evs_paper_defined = std::isfinite(s.mean.evs_paper);
  s.mean.evs_standard_defined = s.median.evs_standard_defined = std::isfinite(s.mean.evs_standard);
  return s;
}

}  // namespace relucraft::metrics

#pragma once

// Regression scores. The "paper" variants follow the printed definitions:
//   mdae_paper = median_i |f_i - median(y)|
//   evs_paper  = 1 - sum (y_i - f_i)^2 / sum y_i^2
// and the standard variants are reported next to them. Medians of an even
// count take the lower middle element.

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace relucraft::metrics {

struct MetricsReport {
  double mse = 0.0, mae = 0.0;
  double mdae_paper = 0.0, mdae_standard = 0.0;
  double r2s = 0.0;
  double evs_paper = 0.0, evs_standard = 0.0;
  std::size_t n_points = 0;
  // False when the denominator vanishes; the value is then NaN.
  bool r2s_defined = true, evs_paper_defined = true, evs_standard_defined = true;
};

// Throws InvalidInput on empty or mismatched inputs.
MetricsReport compute_metrics(std::span<const double> predictions, std::span<const double> targets);

double lower_median(std::vector<double> v);

nlohmann::json to_json(const MetricsReport& m);

// Per-field mean and lower median over several reports (undefined values skipped).
struct MetricsSummary {
  MetricsReport mean, median;
  std::size_t count = 0;
};
MetricsSummary summarize(std::span<const MetricsReport> reports);

}  // namespace relucraft::metrics

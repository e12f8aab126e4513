#pragma once

// Fully connected ReLU regressors trained by Adam on the squared loss.
//
// A net with shape [d, w_1, ..., w_L, 1] has L hidden ReLU layers and a
// linear output. Batches are column-major: one sample per column.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "relucraft/datagen.hpp"
#include "relucraft/metrics.hpp"

namespace relucraft::erm {

struct TrainConfig {
  std::vector<int> shape;  // input, hidden widths..., output (must be 1)
  double r0 = 1e-3;        // initial descent step
  double decay_rate = 0.95;
  int decay_step = 1000;
  int iterations = 5000;
  int batch_size = 128;  // 0 means full batch
  std::uint64_t seed = 0;
  double m_clip = 0.0;  // truncation level for test predictions, 0 = none
  std::string init_scheme = "glorot_uniform";  // or "he_uniform"
  bool standardize = true;  // z-score inputs and targets with training statistics
  int history_every = 250;

  int depth() const { return static_cast<int>(shape.size()) - 2; }
  // Throws InvalidInput on a bad shape or out-of-range hyperparameters.
  void validate() const;
};

TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);

class Mlp {
 public:
  std::vector<Eigen::MatrixXd> weights;  // weights[k] is shape[k+1] x shape[k]
  std::vector<Eigen::VectorXd> biases;

  std::size_t param_count() const;
  // Weights then biases per layer, each matrix column-major.
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& v);

  // 1 x m row of outputs.
  Eigen::RowVectorXd predict(const Eigen::MatrixXd& x) const;
};

// Weights from the configured scheme, biases zero; deterministic in cfg.seed.
//  glorot_uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out))
//  he_uniform:     U(-a, a), a = sqrt(6 / fan_in)
Mlp init_mlp(const TrainConfig& cfg);
double init_limit(const std::string& scheme, int fan_in, int fan_out);

struct Gradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;

  Eigen::VectorXd flat() const;
};

// Mean squared loss over the batch and its exact gradient (relu'(0) = 0).
// Throws Divergence on non-finite activations or loss.
Gradient grad_mse(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
double mse_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, stabilizer = 1e-8;
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
};
AdamState adam_init(const Mlp& net);

// r0 * decay_rate^floor(step / decay_step).
double descent_step(const TrainConfig& cfg, long step);

// One bias-corrected Adam update at global step `step` (0-based). Throws
// Divergence if the moments become non-finite.
void adam_step(AdamState& state, Mlp& net, const Gradient& g, long step, const TrainConfig& cfg);

// sign(v) min(|v|, M).
double truncate(double v, double M);

struct HistoryPoint {
  long step = 0;
  double train_mse = 0.0;
};

struct RunReport {
  TrainConfig config;
  double final_train_mse = 0.0;
  metrics::MetricsReport test;                       // against the stored targets
  std::optional<metrics::MetricsReport> test_clean;  // against noiseless targets, if present
  double baseline_test_mse = 0.0;                    // constant training-mean predictor
  std::vector<HistoryPoint> history;
  long iterations_run = 0;
  bool diverged = false;
  bool valid = false;
  double wall_time = 0.0;  // seconds; not part of the numeric record
};

// Full training loop. On divergence training stops, the last finite
// checkpoint is restored, and the report is marked invalid.
RunReport train(const TrainConfig& cfg, const datagen::Dataset& train_set, const datagen::Dataset& test_set);

// include_timing adds wall_time; leave it off for replayable records.
nlohmann::json to_json(const RunReport& r, bool include_timing = false);

// Column-major batch from a dataset.
Eigen::MatrixXd inputs(const datagen::Dataset& d);
Eigen::VectorXd targets(const datagen::Dataset& d);

}  // namespace relucraft::erm

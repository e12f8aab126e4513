#pragma once

// Explicit deep ReLU networks: storage, evaluation, algebra and free-parameter
// accounting.
//
// A network with L hidden layers computes
//   h_0 = x,  h_k = relu(W_k h_{k-1} + b_k)  (k = 1..L),  y = A h_L + c.
//
// Every stored weight/bias carries a ParamId. kFixed marks a structural
// constant that is never counted as free; entries sharing a non-negative id
// form one weight-share group and are counted once. Absent sparse entries are
// fixed zeros.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relucraft/error.hpp"

namespace relucraft::netcore {

using ParamId = std::int64_t;
inline constexpr ParamId kFixed = -1;

struct Entry {
  int col = 0;
  double value = 0.0;
  ParamId param = kFixed;
};

// Row-major sparse matrix; each row keeps its entries sorted by column.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols);

  int rows() const { return static_cast<int>(rows_.size()); }
  int cols() const { return cols_; }
  std::size_t nnz() const;

  std::span<const Entry> row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

  // Appends to row i. Columns may arrive in any order; duplicates are rejected
  // by finalize().
  void add(int i, int col, double value, ParamId param = kFixed);
  void set_row(int i, std::vector<Entry> entries);
  void append_row(std::vector<Entry> entries);
  void finalize();

  // Dense view, absent entries as 0.
  std::vector<std::vector<double>> to_dense() const;

 private:
  int cols_ = 0;
  std::vector<std::vector<Entry>> rows_;
};

// y = W x + b. Used both for hidden layers (followed by relu) and for the
// output map.
struct Affine {
  SparseMatrix weights;
  std::vector<double> bias;
  std::vector<ParamId> bias_param;

  Affine() = default;
  Affine(int out_dim, int in_dim);

  int in_dim() const { return weights.cols(); }
  int out_dim() const { return weights.rows(); }
  void set_bias(int i, double value, ParamId param = kFixed);
  void apply(std::span<const double> x, std::span<double> y) const;
};

class ReluNet {
 public:
  ReluNet() = default;
  // Validates dimension chaining and share-group consistency.
  ReluNet(int input_dim, std::vector<Affine> layers, Affine output_map);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_.out_dim(); }
  int depth() const { return static_cast<int>(layers_.size()); }
  const std::vector<Affine>& layers() const { return layers_; }
  const Affine& output_map() const { return output_; }

  std::vector<double> eval(std::span<const double> x) const;
  double eval_scalar(std::span<const double> x) const;

  std::vector<int> widths() const;
  int max_width() const;
  std::size_t nnz() const;

  // Largest |value| over tunable (non-fixed) entries.
  double param_bound() const;
  // Largest |value| over every stored entry.
  double max_abs_entry() const;

 private:
  friend class Evaluator;
  int input_dim_ = 0;
  std::vector<Affine> layers_;
  Affine output_;
};

// Reusable scratch buffers for repeated evaluation of one network.
// Not thread-safe; use one per thread.
class Evaluator {
 public:
  explicit Evaluator(const ReluNet& net);
  std::span<const double> operator()(std::span<const double> x);
  double scalar(std::span<const double> x) { return (*this)(x)[0]; }

 private:
  const ReluNet* net_;
  std::vector<double> a_, b_, out_;
};

// Distinct non-negative ParamIds across layers, biases and the output map.
std::size_t count_free_params(const ReluNet& net);

// How member parameters relate when networks are combined.
//  kIndependent: members' ids are re-keyed so nothing is shared across them.
//  kShared: ids are kept; equal ids in different members denote one parameter.
enum class Sharing { kIndependent, kShared };

// outer(inner(x)). inner's output map is fused into outer's first layer, so
// depth(result) = depth(outer) + depth(inner). A fused entry depending on any
// tunable factor is tunable; its id is a hash of the factors it was built
// from, so identical derivations land in the same share group.
ReluNet compose(const ReluNet& outer, const ReluNet& inner,
                Sharing sharing = Sharing::kIndependent);

// Members evaluated on the same input; outputs concatenated. With
// pad_to_common_depth, shallower members get identity layers appended: exact
// two-unit channels by default, or identity_channels(pad_bound) when the
// member outputs are known to lie in [-pad_bound, pad_bound].
//
// Padding fuses a member's output map into the identity's first layer. With
// the one-unit channels this keeps the free-parameter count; with exact
// channels every tunable output entry of a padded member appears twice (once
// per sign), so the count grows by that member's tunable output slots.
inline constexpr double kExactPad = -1.0;
ReluNet parallel(std::span<const ReluNet> nets, bool pad_to_common_depth,
                 Sharing sharing = Sharing::kIndependent, double pad_bound = kExactPad);

// Members evaluated on consecutive slices of the input (block diagonal).
ReluNet direct_sum(std::span<const ReluNet> nets, bool pad_to_common_depth,
                   Sharing sharing = Sharing::kIndependent, double pad_bound = kExactPad);

// Identity on [-bound, bound]^dim through `depth` layers, one unit per channel:
// relu(x + bound) - bound. Inputs below -bound come out as -bound.
ReluNet identity_channels(int dim, int depth, double bound);

// Identity on all of R^dim via relu(x) - relu(-x); two units per channel.
ReluNet exact_identity(int dim, int depth);

// Coordinatewise min(1, max(-1, x)) = relu(x+1) - relu(x-1) - 1, one layer.
ReluNet clamp_net(int dim);
// Same clamp as relu(x) - relu(x-1) - relu(-x) + relu(-x-1): four units per
// channel but no output offset, so nothing is folded into the next layer's biases.
ReluNet clamp_net_unbiased(int dim);

// net(M x + c): fused into the first layer.
ReluNet precompose_affine(const ReluNet& net, const SparseMatrix& m,
                          std::span<const double> offset);
// M net(x) + c: fused into the output map. offset_param may be empty.
ReluNet postcompose_affine(const ReluNet& net, const SparseMatrix& m,
                           std::span<const double> offset,
                           std::span<const ParamId> offset_param = {});

// Replaces every id p >= 0 by a salted hash of p.
ReluNet rekey(const ReluNet& net, std::uint64_t salt);

// JSON document {input_dim, layers:[{weights, biases, mask?, share_groups?}],
// output_map}. Small matrices are written dense, large ones as sparse
// {rows, cols, entries:[[i,j,v],...]}. Round trip is bit-exact for finite values.
nlohmann::json to_json(const ReluNet& net);
ReluNet from_json(const nlohmann::json& doc);

}  // namespace relucraft::netcore

#include "relucraft/netcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "relucraft/hash.hpp"

namespace relucraft::netcore {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw InvalidInput(msg); }

ParamId to_id(std::uint64_t h) { return static_cast<ParamId>(h >> 2); }

}  // namespace

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(int rows, int cols) : cols_(cols) {
  if (rows < 0 || cols < 0) fail("negative matrix dimension");
  rows_.resize(static_cast<std::size_t>(rows));
}

std::size_t SparseMatrix::nnz() const {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.size();
  return n;
}

void SparseMatrix::add(int i, int col, double value, ParamId param) {
  if (i < 0 || i >= rows()) fail("row index out of range");
  if (col < 0 || col >= cols_) fail("column index out of range");
  rows_[static_cast<std::size_t>(i)].push_back({col, value, param});
}

void SparseMatrix::set_row(int i, std::vector<Entry> entries) {
  if (i < 0 || i >= rows()) fail("row index out of range");
  rows_[static_cast<std::size_t>(i)] = std::move(entries);
}

void SparseMatrix::append_row(std::vector<Entry> entries) {
  rows_.push_back(std::move(entries));
}

void SparseMatrix::finalize() {
  for (auto& r : rows_) {
    std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r[k].col < 0 || r[k].col >= cols_) fail("column index out of range");
      if (k > 0 && r[k].col == r[k - 1].col) fail("duplicate sparse entry");
    }
  }
}

std::vector<std::vector<double>> SparseMatrix::to_dense() const {
  std::vector<std::vector<double>> d(rows_.size(), std::vector<double>(static_cast<std::size_t>(cols_), 0.0));
  for (std::size_t i = 0; i < rows_.size(); ++i)
    for (const Entry& e : rows_[i]) d[i][static_cast<std::size_t>(e.col)] = e.value;
  return d;
}

// ---------------------------------------------------------------------------
// Affine

Affine::Affine(int out_dim, int in_dim)
    : weights(out_dim, in_dim),
      bias(static_cast<std::size_t>(out_dim), 0.0),
      bias_param(static_cast<std::size_t>(out_dim), kFixed) {}

void Affine::set_bias(int i, double value, ParamId param) {
  if (i < 0 || i >= out_dim()) fail("bias index out of range");
  bias[static_cast<std::size_t>(i)] = value;
  bias_param[static_cast<std::size_t>(i)] = param;
}

void Affine::apply(std::span<const double> x, std::span<double> y) const {
  const int n = out_dim();
  for (int i = 0; i < n; ++i) {
    double s = bias[static_cast<std::size_t>(i)];
    for (const Entry& e : weights.row(i)) s += e.value * x[static_cast<std::size_t>(e.col)];
    y[static_cast<std::size_t>(i)] = s;
  }
}

// ---------------------------------------------------------------------------
// ReluNet

namespace {

void check_affine(const Affine& a, const std::string& where) {
  if (a.bias.size() != static_cast<std::size_t>(a.out_dim()) ||
      a.bias_param.size() != static_cast<std::size_t>(a.out_dim()))
    fail(where + ": bias length does not match output dimension");
  for (int i = 0; i < a.out_dim(); ++i) {
    int prev = -1;
    for (const Entry& e : a.weights.row(i)) {
      if (e.col < 0 || e.col >= a.in_dim()) fail(where + ": column index out of range");
      if (e.col <= prev) fail(where + ": row entries not strictly increasing by column");
      prev = e.col;
    }
  }
}

template <class F>
void for_each_slot(const std::vector<Affine>& layers, const Affine& out, F&& f) {
  auto visit = [&](const Affine& a) {
    for (int i = 0; i < a.out_dim(); ++i) {
      for (const Entry& e : a.weights.row(i)) f(e.value, e.param);
      f(a.bias[static_cast<std::size_t>(i)], a.bias_param[static_cast<std::size_t>(i)]);
    }
  };
  for (const auto& l : layers) visit(l);
  visit(out);
}

}  // namespace

ReluNet::ReluNet(int input_dim, std::vector<Affine> layers, Affine output_map)
    : input_dim_(input_dim), layers_(std::move(layers)), output_(std::move(output_map)) {
  if (input_dim_ < 1) fail("input dimension must be positive");
  if (layers_.empty()) fail("a network needs at least one hidden layer");
  int prev = input_dim_;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const std::string where = "layer " + std::to_string(k + 1);
    if (layers_[k].in_dim() != prev) fail(where + ": input dimension mismatch");
    if (layers_[k].out_dim() < 1) fail(where + ": empty layer");
    check_affine(layers_[k], where);
    prev = layers_[k].out_dim();
  }
  if (output_.in_dim() != prev) fail("output map: input dimension mismatch");
  if (output_.out_dim() < 1) fail("output map: empty");
  check_affine(output_, "output map");

  std::unordered_map<ParamId, double> seen;
  for_each_slot(layers_, output_, [&](double v, ParamId p) {
    if (p < 0) {
      if (p != kFixed) fail("negative parameter id other than the fixed marker");
      return;
    }
    auto [it, fresh] = seen.emplace(p, v);
    if (!fresh && std::bit_cast<std::uint64_t>(it->second) != std::bit_cast<std::uint64_t>(v))
      fail("share group " + std::to_string(p) + " holds unequal values");
  });
}

std::vector<double> ReluNet::eval(std::span<const double> x) const {
  Evaluator ev(*this);
  auto y = ev(x);
  return {y.begin(), y.end()};
}

double ReluNet::eval_scalar(std::span<const double> x) const {
  if (output_dim() != 1) fail("eval_scalar on a vector-valued network");
  return eval(x)[0];
}

std::vector<int> ReluNet::widths() const {
  std::vector<int> w;
  w.reserve(layers_.size());
  for (const auto& l : layers_) w.push_back(l.out_dim());
  return w;
}

int ReluNet::max_width() const {
  int m = 0;
  for (const auto& l : layers_) m = std::max(m, l.out_dim());
  return m;
}

std::size_t ReluNet::nnz() const {
  std::size_t n = output_.weights.nnz();
  for (const auto& l : layers_) n += l.weights.nnz();
  return n;
}

double ReluNet::param_bound() const {
  double m = 0.0;
  for_each_slot(layers_, output_, [&](double v, ParamId p) {
    if (p >= 0) m = std::max(m, std::abs(v));
  });
  return m;
}

double ReluNet::max_abs_entry() const {
  double m = 0.0;
  for_each_slot(layers_, output_, [&](double v, ParamId) { m = std::max(m, std::abs(v)); });
  return m;
}

// ---------------------------------------------------------------------------
// Evaluator

Evaluator::Evaluator(const ReluNet& net) : net_(&net) {
  const std::size_t w = static_cast<std::size_t>(std::max(net.max_width(), net.input_dim()));
  a_.resize(w);
  b_.resize(w);
  out_.resize(static_cast<std::size_t>(net.output_dim()));
}

std::span<const double> Evaluator::operator()(std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(net_->input_dim_)) fail("input has wrong dimension");
  std::span<const double> cur = x;
  std::vector<double>* dst = &a_;
  for (const Affine& l : net_->layers_) {
    std::span<double> y(dst->data(), static_cast<std::size_t>(l.out_dim()));
    l.apply(cur, y);
    for (double& v : y) v = v > 0.0 ? v : 0.0;
    cur = y;
    dst = (dst == &a_) ? &b_ : &a_;
  }
  net_->output_.apply(cur, out_);
  return out_;
}

// ---------------------------------------------------------------------------
// Parameter accounting

std::size_t count_free_params(const ReluNet& net) {
  std::unordered_set<ParamId> ids;
  for_each_slot(net.layers(), net.output_map(), [&](double, ParamId p) {
    if (p >= 0) ids.insert(p);
  });
  return ids.size();
}

ReluNet rekey(const ReluNet& net, std::uint64_t salt) {
  auto re = [salt](ParamId p) { return p < 0 ? p : to_id(Hasher().add(salt).add(static_cast<std::uint64_t>(p)).value()); };
  auto map_affine = [&](Affine a) {
    for (int i = 0; i < a.out_dim(); ++i) {
      std::vector<Entry> row(a.weights.row(i).begin(), a.weights.row(i).end());
      for (Entry& e : row) e.param = re(e.param);
      a.weights.set_row(i, std::move(row));
      a.bias_param[static_cast<std::size_t>(i)] = re(a.bias_param[static_cast<std::size_t>(i)]);
    }
    return a;
  };
  std::vector<Affine> layers;
  layers.reserve(net.layers().size());
  for (const auto& l : net.layers()) layers.push_back(map_affine(l));
  return ReluNet(net.input_dim(), std::move(layers), map_affine(net.output_map()));
}

// ---------------------------------------------------------------------------
// Fusion of two affine maps: (second ∘ first)(x) = W2 (W1 x + b1) + b2.

namespace {

constexpr std::uint64_t kFixedTag = 1ULL << 63;

std::uint64_t factor_key(double v, ParamId p) {
  if (p >= 0) return static_cast<std::uint64_t>(p);
  return kFixedTag | (mix64(std::bit_cast<std::uint64_t>(v)) >> 1);
}

struct Term {
  std::uint64_t k1, k2;
  double value;
  bool tunable;
};

// Sums terms in a canonical order; returns (value, id) with id = kFixed when
// every factor is fixed. `drop` is set for fixed zero sums.
struct Fused {
  double value;
  ParamId param;
  bool drop;
};

Fused fuse_terms(std::vector<Term>& terms) {
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
    return a.k1 != b.k1 ? a.k1 < b.k1 : a.k2 < b.k2;
  });
  double s = 0.0;
  bool tunable = false;
  Hasher h("fuse");
  for (const Term& t : terms) {
    s += t.value;
    tunable = tunable || t.tunable;
    h.add(t.k1).add(t.k2);
  }
  if (!tunable) return {s, kFixed, s == 0.0};
  return {s, to_id(h.value()), false};
}

Affine fuse(const Affine& second, const Affine& first) {
  if (second.in_dim() != first.out_dim()) fail("fusion dimension mismatch");
  const std::uint64_t one_key = factor_key(1.0, kFixed);
  Affine out(second.out_dim(), first.in_dim());
  std::vector<std::pair<int, Term>> acc;
  std::vector<Term> bias_terms;
  for (int i = 0; i < second.out_dim(); ++i) {
    acc.clear();
    bias_terms.clear();
    for (const Entry& w : second.weights.row(i)) {
      const std::uint64_t kw = factor_key(w.value, w.param);
      const bool tw = w.param >= 0;
      for (const Entry& a : first.weights.row(w.col))
        acc.push_back({a.col, {kw, factor_key(a.value, a.param), w.value * a.value, tw || a.param >= 0}});
      const std::size_t c = static_cast<std::size_t>(w.col);
      const ParamId pc = first.bias_param[c];
      if (first.bias[c] != 0.0 || pc >= 0)
        bias_terms.push_back({kw, factor_key(first.bias[c], pc), w.value * first.bias[c], tw || pc >= 0});
    }
    const std::size_t ii = static_cast<std::size_t>(i);
    if (second.bias[ii] != 0.0 || second.bias_param[ii] >= 0)
      bias_terms.push_back({factor_key(second.bias[ii], second.bias_param[ii]), one_key, second.bias[ii],
                            second.bias_param[ii] >= 0});

    std::stable_sort(acc.begin(), acc.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<Entry> row;
    std::vector<Term> group;
    for (std::size_t k = 0; k < acc.size();) {
      std::size_t e = k;
      group.clear();
      while (e < acc.size() && acc[e].first == acc[k].first) group.push_back(acc[e++].second);
      Fused f = fuse_terms(group);
      if (!f.drop) row.push_back({acc[k].first, f.value, f.param});
      k = e;
    }
    out.weights.set_row(i, std::move(row));
    if (!bias_terms.empty()) {
      Fused f = fuse_terms(bias_terms);
      out.set_bias(i, f.value, f.param);
    }
  }
  return out;
}

constexpr std::uint64_t kOuterSalt = 0x5be0cd19137e2179ULL;
constexpr std::uint64_t kInnerSalt = 0x1f83d9abfb41bd6bULL;

}  // namespace

ReluNet compose(const ReluNet& outer, const ReluNet& inner, Sharing sharing) {
  if (outer.input_dim() != inner.output_dim()) fail("compose: dimension mismatch");
  if (sharing == Sharing::kIndependent)
    return compose(rekey(outer, kOuterSalt), rekey(inner, kInnerSalt), Sharing::kShared);
  std::vector<Affine> layers(inner.layers());
  layers.push_back(fuse(outer.layers().front(), inner.output_map()));
  for (std::size_t k = 1; k < outer.layers().size(); ++k) layers.push_back(outer.layers()[k]);
  return ReluNet(inner.input_dim(), std::move(layers), outer.output_map());
}

// ---------------------------------------------------------------------------
// Stacking

namespace {

ReluNet stack(std::span<const ReluNet> nets, bool pad, Sharing sharing, double pad_bound, bool block_inputs) {
  if (nets.empty()) fail("cannot combine zero networks");
  int depth = nets[0].depth();
  for (const auto& n : nets) depth = std::max(depth, n.depth());

  std::vector<ReluNet> members;
  members.reserve(nets.size());
  for (std::size_t m = 0; m < nets.size(); ++m) {
    ReluNet n = sharing == Sharing::kIndependent ? rekey(nets[m], mix64(0x9b05688c2b3e6c1fULL + m)) : nets[m];
    if (n.depth() != depth) {
      if (!pad) fail("members differ in depth and padding is off");
      ReluNet id = pad_bound < 0.0 ? exact_identity(n.output_dim(), depth - n.depth())
                                   : identity_channels(n.output_dim(), depth - n.depth(), pad_bound);
      n = compose(id, n, Sharing::kShared);
    }
    members.push_back(std::move(n));
  }

  int in_dim = 0;
  if (block_inputs) {
    for (const auto& n : members) in_dim += n.input_dim();
  } else {
    in_dim = members[0].input_dim();
    for (const auto& n : members)
      if (n.input_dim() != in_dim) fail("parallel: members differ in input dimension");
  }

  auto join = [&](auto get, int cols, std::vector<int> col_offset) {
    int rows = 0;
    for (const auto& n : members) rows += get(n).out_dim();
    Affine a(rows, cols);
    int r = 0;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const Affine& src = get(members[m]);
      for (int i = 0; i < src.out_dim(); ++i, ++r) {
        std::vector<Entry> row(src.weights.row(i).begin(), src.weights.row(i).end());
        for (Entry& e : row) e.col += col_offset[m];
        a.weights.set_row(r, std::move(row));
        a.set_bias(r, src.bias[static_cast<std::size_t>(i)], src.bias_param[static_cast<std::size_t>(i)]);
      }
    }
    return a;
  };

  std::vector<int> offs(members.size(), 0);
  if (block_inputs)
    for (std::size_t m = 1; m < members.size(); ++m) offs[m] = offs[m - 1] + members[m - 1].input_dim();

  std::vector<Affine> layers;
  layers.reserve(static_cast<std::size_t>(depth));
  int cols = in_dim;
  for (int k = 0; k < depth; ++k) {
    auto get = [k](const ReluNet& n) -> const Affine& { return n.layers()[static_cast<std::size_t>(k)]; };
    layers.push_back(join(get, cols, offs));
    cols = layers.back().out_dim();
    for (std::size_t m = 1; m < members.size(); ++m) offs[m] = offs[m - 1] + get(members[m - 1]).out_dim();
  }
  auto get_out = [](const ReluNet& n) -> const Affine& { return n.output_map(); };
  Affine out = join(get_out, cols, offs);
  return ReluNet(in_dim, std::move(layers), std::move(out));
}

}  // namespace

ReluNet parallel(std::span<const ReluNet> nets, bool pad_to_common_depth, Sharing sharing, double pad_bound) {
  return stack(nets, pad_to_common_depth, sharing, pad_bound, false);
}

ReluNet direct_sum(std::span<const ReluNet> nets, bool pad_to_common_depth, Sharing sharing, double pad_bound) {
  return stack(nets, pad_to_common_depth, sharing, pad_bound, true);
}

// ---------------------------------------------------------------------------
// Structural helpers

ReluNet identity_channels(int dim, int depth, double bound) {
  if (dim < 1 || depth < 1) fail("identity_channels needs dim >= 1 and depth >= 1");
  if (!(bound >= 0.0) || !std::isfinite(bound)) fail("identity_channels needs a finite bound >= 0");
  std::vector<Affine> layers;
  for (int k = 0; k < depth; ++k) {
    Affine a(dim, dim);
    for (int i = 0; i < dim; ++i) {
      a.weights.add(i, i, 1.0);
      if (k == 0) a.set_bias(i, bound);
    }
    layers.push_back(std::move(a));
  }
  Affine out(dim, dim);
  for (int i = 0; i < dim; ++i) {
    out.weights.add(i, i, 1.0);
    out.set_bias(i, -bound);
  }
  return ReluNet(dim, std::move(layers), std::move(out));
}

ReluNet exact_identity(int dim, int depth) {
  if (dim < 1 || depth < 1) fail("exact_identity needs dim >= 1 and depth >= 1");
  std::vector<Affine> layers;
  Affine first(2 * dim, dim);
  for (int i = 0; i < dim; ++i) {
    first.weights.add(2 * i, i, 1.0);
    first.weights.add(2 * i + 1, i, -1.0);
  }
  layers.push_back(std::move(first));
  for (int k = 1; k < depth; ++k) {
    Affine a(2 * dim, 2 * dim);
    for (int i = 0; i < 2 * dim; ++i) a.weights.add(i, i, 1.0);
    layers.push_back(std::move(a));
  }
  Affine out(dim, 2 * dim);
  for (int i = 0; i < dim; ++i) {
    out.weights.add(i, 2 * i, 1.0);
    out.weights.add(i, 2 * i + 1, -1.0);
  }
  return ReluNet(dim, std::move(layers), std::move(out));
}

ReluNet clamp_net(int dim) {
  if (dim < 1) fail("clamp_net needs dim >= 1");
  Affine first(2 * dim, dim);
  for (int i = 0; i < dim; ++i) {
    first.weights.add(2 * i, i, 1.0);
    first.set_bias(2 * i, 1.0);
    first.weights.add(2 * i + 1, i, 1.0);
    first.set_bias(2 * i + 1, -1.0);
  }
  Affine out(dim, 2 * dim);
  for (int i = 0; i < dim; ++i) {
    out.weights.add(i, 2 * i, 1.0);
    out.weights.add(i, 2 * i + 1, -1.0);
    out.set_bias(i, -1.0);
  }
  std::vector<Affine> layers;
  layers.push_back(std::move(first));
  return ReluNet(dim, std::move(layers), std::move(out));
}

ReluNet clamp_net_unbiased(int dim) {
  if (dim < 1) fail("clamp_net_unbiased needs dim >= 1");
  const double shift[4] = {0.0, -1.0, 0.0, -1.0};
  const double sign[4] = {1.0, 1.0, -1.0, -1.0};
  const double read[4] = {1.0, -1.0, -1.0, 1.0};
  Affine first(4 * dim, dim);
  Affine out(dim, 4 * dim);
  for (int i = 0; i < dim; ++i)
    for (int t = 0; t < 4; ++t) {
      first.weights.add(4 * i + t, i, sign[t]);
      first.set_bias(4 * i + t, shift[t]);
      out.weights.add(i, 4 * i + t, read[t]);
    }
  std::vector<Affine> layers;
  layers.push_back(std::move(first));
  return ReluNet(dim, std::move(layers), std::move(out));
}

namespace {

Affine make_affine(const SparseMatrix& m, std::span<const double> offset, std::span<const ParamId> offset_param) {
  if (offset.size() != static_cast<std::size_t>(m.rows())) fail("affine offset has wrong length");
  if (!offset_param.empty() && offset_param.size() != offset.size()) fail("offset ids have wrong length");
  Affine a;
  a.weights = m;
  a.weights.finalize();
  a.bias.assign(offset.begin(), offset.end());
  a.bias_param.assign(offset.size(), kFixed);
  if (!offset_param.empty()) a.bias_param.assign(offset_param.begin(), offset_param.end());
  return a;
}

}  // namespace

ReluNet precompose_affine(const ReluNet& net, const SparseMatrix& m, std::span<const double> offset) {
  if (m.rows() != net.input_dim()) fail("precompose: matrix rows must equal the network input dimension");
  if (m.cols() < 1) fail("precompose: empty input");
  Affine pre = make_affine(m, offset, {});
  std::vector<Affine> layers(net.layers());
  layers.front() = fuse(net.layers().front(), pre);
  return ReluNet(m.cols(), std::move(layers), net.output_map());
}

ReluNet postcompose_affine(const ReluNet& net, const SparseMatrix& m, std::span<const double> offset,
                           std::span<const ParamId> offset_param) {
  if (m.cols() != net.output_dim()) fail("postcompose: matrix cols must equal the network output dimension");
  if (m.rows() < 1) fail("postcompose: empty output");
  Affine post = make_affine(m, offset, offset_param);
  return ReluNet(net.input_dim(), net.layers(), fuse(post, net.output_map()));
}

}  // namespace relucraft::netcore

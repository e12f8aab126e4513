#include <cmath>
#include <unordered_set>

#include "relucraft/netcore.hpp"

namespace relucraft::netcore {

using nlohmann::json;

namespace {

constexpr long long kDenseLimit = 10000;

[[noreturn]] void fail(const std::string& msg) { throw InvalidInput("network json: " + msg); }

double finite(double v) {
  if (!std::isfinite(v)) fail("non-finite value");
  return v;
}

json affine_to_json(const Affine& a) {
  const int rows = a.out_dim(), cols = a.in_dim();
  json j;
  json w, mask_w, grp_w;
  if (static_cast<long long>(rows) * cols <= kDenseLimit) {
    w = json::array();
    mask_w = json::array();
    grp_w = json::array();
    for (int i = 0; i < rows; ++i) {
      std::vector<double> v(static_cast<std::size_t>(cols), 0.0);
      std::vector<bool> m(static_cast<std::size_t>(cols), false);
      std::vector<ParamId> g(static_cast<std::size_t>(cols), kFixed);
      for (const Entry& e : a.weights.row(i)) {
        const auto c = static_cast<std::size_t>(e.col);
        v[c] = finite(e.value);
        m[c] = e.param >= 0;
        g[c] = e.param;
      }
      w.push_back(v);
      mask_w.push_back(m);
      grp_w.push_back(g);
    }
  } else {
    json entries = json::array();
    mask_w = json::array();
    grp_w = json::array();
    for (int i = 0; i < rows; ++i)
      for (const Entry& e : a.weights.row(i)) {
        entries.push_back(json::array({i, e.col, finite(e.value)}));
        mask_w.push_back(e.param >= 0);
        grp_w.push_back(e.param);
      }
    w = {{"rows", rows}, {"cols", cols}, {"entries", std::move(entries)}};
  }
  j["weights"] = std::move(w);
  json b = json::array(), mask_b = json::array();
  for (int i = 0; i < rows; ++i) {
    b.push_back(finite(a.bias[static_cast<std::size_t>(i)]));
    mask_b.push_back(a.bias_param[static_cast<std::size_t>(i)] >= 0);
  }
  j["biases"] = std::move(b);
  j["mask"] = {{"weights", std::move(mask_w)}, {"biases", std::move(mask_b)}};
  j["share_groups"] = {{"weights", std::move(grp_w)}, {"biases", a.bias_param}};
  return j;
}

// Hands out ids for tunable entries that arrive without a share group.
struct FreshIds {
  std::unordered_set<ParamId> used;
  ParamId next = 0;
  ParamId take() {
    while (used.count(next)) ++next;
    used.insert(next);
    return next++;
  }
};

struct Slot {
  bool has_mask = false, has_group = false;
  bool mask = true;
  ParamId group = kFixed;
};

ParamId resolve(const Slot& s, FreshIds& fresh) {
  if (s.has_group) {
    if (s.has_mask && s.mask != (s.group >= 0)) fail("mask disagrees with share group");
    if (s.group < kFixed) fail("share group ids must be >= -1");
    return s.group;
  }
  if (s.has_mask && !s.mask) return kFixed;
  return fresh.take();
}

void collect_groups(const json& layer, FreshIds& fresh) {
  if (!layer.contains("share_groups")) return;
  const json& g = layer.at("share_groups");
  auto scan = [&](const json& v, auto&& self) -> void {
    if (v.is_array()) {
      for (const auto& x : v) self(x, self);
    } else {
      fresh.used.insert(v.get<ParamId>());
    }
  };
  if (g.contains("weights")) scan(g.at("weights"), scan);
  if (g.contains("biases")) scan(g.at("biases"), scan);
}

Affine affine_from_json(const json& j, int in_dim, FreshIds& fresh) {
  const json& w = j.at("weights");
  const json& b = j.at("biases");
  const json* mw = nullptr;
  const json* mb = nullptr;
  const json* gw = nullptr;
  const json* gb = nullptr;
  if (j.contains("mask")) {
    mw = &j.at("mask").at("weights");
    mb = &j.at("mask").at("biases");
  }
  if (j.contains("share_groups")) {
    gw = &j.at("share_groups").at("weights");
    gb = &j.at("share_groups").at("biases");
  }
  const int rows = static_cast<int>(b.size());
  Affine a(rows, in_dim);

  if (w.is_array()) {
    if (static_cast<int>(w.size()) != rows) fail("weights rows do not match biases");
    for (int i = 0; i < rows; ++i) {
      const json& row = w.at(static_cast<std::size_t>(i));
      if (static_cast<int>(row.size()) != in_dim) fail("weights cols do not match previous width");
      for (int c = 0; c < in_dim; ++c) {
        const auto ic = static_cast<std::size_t>(i), cc = static_cast<std::size_t>(c);
        Slot s;
        if (mw) s.has_mask = true, s.mask = mw->at(ic).at(cc).get<bool>();
        if (gw) s.has_group = true, s.group = gw->at(ic).at(cc).get<ParamId>();
        const double v = finite(row.at(cc).get<double>());
        const ParamId p = resolve(s, fresh);
        if (p == kFixed && v == 0.0) continue;
        a.weights.add(i, c, v, p);
      }
    }
  } else {
    if (w.at("rows").get<int>() != rows) fail("weights rows do not match biases");
    if (w.at("cols").get<int>() != in_dim) fail("weights cols do not match previous width");
    const json& entries = w.at("entries");
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const json& e = entries[k];
      Slot s;
      if (mw) s.has_mask = true, s.mask = mw->at(k).get<bool>();
      if (gw) s.has_group = true, s.group = gw->at(k).get<ParamId>();
      a.weights.add(e.at(0).get<int>(), e.at(1).get<int>(), finite(e.at(2).get<double>()), resolve(s, fresh));
    }
  }
  a.weights.finalize();
  for (int i = 0; i < rows; ++i) {
    const auto ic = static_cast<std::size_t>(i);
    Slot s;
    if (mb) s.has_mask = true, s.mask = mb->at(ic).get<bool>();
    if (gb) s.has_group = true, s.group = gb->at(ic).get<ParamId>();
    a.set_bias(i, finite(b.at(ic).get<double>()), resolve(s, fresh));
  }
  return a;
}

}  // namespace

json to_json(const ReluNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) layers.push_back(affine_to_json(l));
  return {{"input_dim", net.input_dim()}, {"layers", std::move(layers)}, {"output_map", affine_to_json(net.output_map())}};
}

ReluNet from_json(const json& doc) {
  try {
    const int input_dim = doc.at("input_dim").get<int>();
    if (input_dim < 1) fail("input_dim must be positive");
    FreshIds fresh;
    for (const auto& l : doc.at("layers")) collect_groups(l, fresh);
    collect_groups(doc.at("output_map"), fresh);
    std::vector<Affine> layers;
    int prev = input_dim;
    for (const auto& l : doc.at("layers")) {
      layers.push_back(affine_from_json(l, prev, fresh));
      prev = layers.back().out_dim();
    }
    Affine out = affine_from_json(doc.at("output_map"), prev, fresh);
    return ReluNet(input_dim, std::move(layers), std::move(out));
  } catch (const json::exception& e) {
    fail(e.what());
  }
}

}  // namespace relucraft::netcore

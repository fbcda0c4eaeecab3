#pragma once
// Graph denoiser g_theta: a graph transformer over a node stream (n rows) and
// an edge stream (n*n rows, row i*n + j). Each layer runs edge-modulated node
// attention, updates the edge stream from the attention scores, and adds
// cross-attention to the conditioning representation (a single token).

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphrcg/autodiff.hpp"
#include "graphrcg/distribution.hpp"
#include "graphrcg/encoder.hpp"
#include "graphrcg/graph.hpp"
#include "graphrcg/nn.hpp"

namespace graphrcg {

struct DenoiserConfig {
  int layers = 8;
  int hidden = 256;      // node stream width
  int edge_hidden = 64;  // edge stream width
  int heads = 8;
  int attn_dim = 64;  // query/key width of the cross-attention
  int time_dim = 128;

  void validate() const {
    if (layers < 1) throw std::invalid_argument("denoiser.layers must be >= 1");
    if (hidden < 1 || edge_hidden < 1 || attn_dim < 1) throw std::invalid_argument("denoiser widths must be >= 1");
    if (heads < 1 || hidden % heads != 0) throw std::invalid_argument("denoiser.heads must divide denoiser.hidden");
    if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("denoiser.time_dim must be even and >= 2");
  }
};

// softmax(Q K^T / sqrt(d)) V added to the stream, with Q from the stream and
// K, V from the representation token(s). No biases.
struct CrossAttention {
  ad::Var w_q;  // stream x d
  ad::Var w_k;  // d_h x d
  ad::Var w_v;  // d_h x stream

  CrossAttention() = default;
  CrossAttention(nn::ParameterStore& store, const std::string& name, ad::Index stream, ad::Index d_h, ad::Index d,
                 Engine& rng)
      : w_q(store.create(name + ".w_q", nn::xavier_uniform(stream, d, rng))),
        w_k(store.create(name + ".w_k", nn::xavier_uniform(d_h, d, rng))),
        w_v(store.create(name + ".w_v", nn::xavier_uniform(d_h, stream, rng))) {}

  ad::Var attention(const ad::Var& stream, const ad::Var& tokens) const {
    const ad::Var q = ad::matmul(stream, w_q);
    const ad::Var k = ad::matmul(tokens, w_k);
    const ad::Var v = ad::matmul(tokens, w_v);
    const double scale = 1.0 / std::sqrt(static_cast<double>(w_q.cols()));
    const ad::Var weights = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), scale));
    return ad::matmul(weights, v);
  }

  ad::Var operator()(const ad::Var& stream, const ad::Var& tokens) const {
    return ad::add(stream, attention(stream, tokens));
  }
};

// Logits and probabilities for one forward pass. Edge logits are symmetric;
// edge_prob has one-hot "no edge" rows on the diagonal.
struct DenoiserOutput {
  ad::Var node_logits;
  ad::Var edge_logits;
  ad::Var node_prob;
  ad::Var edge_prob;

  DistributionPair distributions() const { return {node_prob.value(), edge_prob.value()}; }
};

namespace detail {

struct PairIndex {
  std::shared_ptr<const std::vector<ad::Index>> row;        // r -> i
  std::shared_ptr<const std::vector<ad::Index>> col;        // r -> j
  std::shared_ptr<const std::vector<ad::Index>> transpose;  // r -> j*n + i
};

inline PairIndex pair_index(ad::Index n) {
  std::vector<ad::Index> row, col, tr;
  row.reserve(static_cast<std::size_t>(n * n));
  col.reserve(static_cast<std::size_t>(n * n));
  tr.reserve(static_cast<std::size_t>(n * n));
  for (ad::Index i = 0; i < n; ++i) {
    for (ad::Index j = 0; j < n; ++j) {
      row.push_back(i);
      col.push_back(j);
      tr.push_back(j * n + i);
    }
  }
  return {std::make_shared<const std::vector<ad::Index>>(std::move(row)),
          std::make_shared<const std::vector<ad::Index>>(std::move(col)),
          std::make_shared<const std::vector<ad::Index>>(std::move(tr))};
}

}  // namespace detail

class GraphDenoiser {
 public:
  GraphDenoiser() = default;
  GraphDenoiser(const DenoiserConfig& cfg, int node_types, int edge_types, int d_h, int total_steps, Engine& rng)
      : cfg_(cfg), a_(node_types), b_(edge_types), d_h_(d_h), steps_(total_steps) {
    cfg.validate();
    const ad::Index dx = cfg.hidden, de = cfg.edge_hidden;
    node_in_ = nn::Linear(store_, "denoiser.node_in", a_, dx, rng);
    edge_in_ = nn::Linear(store_, "denoiser.edge_in", b_, de, rng);
    time_ = nn::Mlp(store_, "denoiser.time", cfg.time_dim, dx, dx, rng);
    time_x_ = nn::Linear(store_, "denoiser.time_x", dx, dx, rng);
    time_e_ = nn::Linear(store_, "denoiser.time_e", dx, de, rng);
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "denoiser.layer" + std::to_string(l);
      Layer L;
      L.q = nn::Linear(store_, p + ".q", dx, dx, rng);
      L.k = nn::Linear(store_, p + ".k", dx, dx, rng);
      L.v = nn::Linear(store_, p + ".v", dx, dx, rng);
      L.e_mul = nn::Linear(store_, p + ".e_mul", de, dx, rng);
      L.e_add = nn::Linear(store_, p + ".e_add", de, dx, rng);
      L.node_out = nn::Linear(store_, p + ".node_out", dx, dx, rng);
      L.edge_to_node = nn::Linear(store_, p + ".edge_to_node", de, dx, rng);
      L.edge_out = nn::Linear(store_, p + ".edge_out", dx, de, rng);
      L.path_a = nn::Linear(store_, p + ".path_a", de, de, rng);
      L.path_b = nn::Linear(store_, p + ".path_b", de, de, rng);
      L.path_out = nn::Linear(store_, p + ".path_out", de, de, rng);
      L.node_norm1 = nn::LayerNorm(store_, p + ".node_norm1", dx);
      L.edge_norm1 = nn::LayerNorm(store_, p + ".edge_norm1", de);
      L.cross_x = CrossAttention(store_, p + ".cross_x", dx, d_h, cfg.attn_dim, rng);
      L.cross_e = CrossAttention(store_, p + ".cross_e", de, d_h, cfg.attn_dim, rng);
      L.node_ffn = nn::Mlp(store_, p + ".node_ffn", dx, 2 * dx, dx, rng);
      L.edge_ffn = nn::Mlp(store_, p + ".edge_ffn", de, 2 * de, de, rng);
      L.node_norm2 = nn::LayerNorm(store_, p + ".node_norm2", dx);
      L.edge_norm2 = nn::LayerNorm(store_, p + ".edge_norm2", de);
      layers_.push_back(std::move(L));
    }
    node_head_ = nn::Mlp(store_, "denoiser.node_head", dx, dx, a_, rng);
    edge_head_ = nn::Mlp(store_, "denoiser.edge_head", de, de, b_, rng);
  }

  const DenoiserConfig& config() const { return cfg_; }
  int node_types() const { return a_; }
  int edge_types() const { return b_; }
  int rep_dim() const { return d_h_; }
  int steps() const { return steps_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const CrossAttention& node_cross_attention(int layer) const { return layers_.at(static_cast<std::size_t>(layer)).cross_x; }
  const CrossAttention& edge_cross_attention(int layer) const { return layers_.at(static_cast<std::size_t>(layer)).cross_e; }

  DenoiserOutput forward(const ad::Var& x, const ad::Var& e, const Eigen::VectorXd& rep, int t) const {
    const ad::Index n = x.rows();
    if (n < 1 || x.cols() != a_ || e.cols() != b_ || e.rows() != n * n) {
      throw std::invalid_argument("denoiser: input dimension mismatch");
    }
    if (rep.size() != d_h_) throw std::invalid_argument("denoiser: representation dimension mismatch");
    if (t < 1 || t > steps_) throw std::out_of_range("denoiser: timestep out of range");
    const detail::PairIndex idx = detail::pair_index(n);
    const ad::Var token(ad::Matrix(rep.transpose()));
    const ad::Var temb = ad::silu(time_(ad::Var(nn::timestep_embedding({t}, cfg_.time_dim))));

    ad::Var hx = ad::add_row(node_in_(x), time_x_(temb));
    ad::Var he = ad::add_row(edge_in_(e), time_e_(temb));
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
    for (const Layer& L : layers_) {
      ad::Var y = ad::scale(ad::mul(ad::gather_rows(L.q(hx), idx.row), ad::gather_rows(L.k(hx), idx.col)), scale);
      y = ad::add(ad::mul(y, ad::add_scalar(L.e_mul(he), 1.0)), L.e_add(he));
      // Attention over j for every (i, channel).
      const ad::Var attn = ad::softmax_blocks(y, n);
      const ad::Var msg = ad::segment_sum_rows(ad::mul(attn, ad::gather_rows(L.v(hx), idx.col)), n);
      // Softmax weights sum to one, so attention alone cannot count incident
      // edges; the mean of incident edge states carries that information.
      const ad::Var incident = ad::scale(ad::segment_sum_rows(he, n), 1.0 / static_cast<double>(n));
      hx = L.node_norm1(ad::add(ad::add(hx, L.node_out(msg)), L.edge_to_node(incident)));
      // Two-hop paths i -> k -> j, which attention over single pairs cannot see.
      const ad::Var paths = ad::scale(ad::pair_product(L.path_a(he), L.path_b(he), n), 1.0 / static_cast<double>(n));
      he = L.edge_norm1(ad::add(ad::add(he, L.edge_out(y)), L.path_out(paths)));
      hx = L.cross_x(hx, token);
      he = L.cross_e(he, token);
      hx = L.node_norm2(ad::add(hx, L.node_ffn(hx)));
      he = L.edge_norm2(ad::add(he, L.edge_ffn(he)));
    }

    DenoiserOutput out;
    out.node_logits = node_head_(hx);
    const ad::Var raw = edge_head_(he);
    out.edge_logits = ad::scale(ad::add(raw, ad::gather_rows(raw, idx.transpose)), 0.5);
    out.node_prob = ad::softmax_rows(out.node_logits);
    ad::Matrix off = ad::Matrix::Ones(n * n, b_);
    ad::Matrix diag = ad::Matrix::Zero(n * n, b_);
    for (ad::Index i = 0; i < n; ++i) {
      off.row(i * n + i).setZero();
      diag(i * n + i, kNoEdge) = 1.0;
    }
    out.edge_prob = ad::add(ad::mul(ad::softmax_rows(out.edge_logits), ad::Var(std::move(off))), ad::Var(std::move(diag)));
    return out;
  }

  DenoiserOutput forward(const GraphSample& g, const Eigen::VectorXd& rep, int t) const {
    if (g.node_types() != a_ || g.edge_types() != b_) throw std::invalid_argument("denoiser: type vocabulary mismatch");
    return forward(ad::Var(g.node_one_hot()), ad::Var(g.edge_one_hot()), rep, t);
  }

  DistributionPair predict_clean(const GraphSample& g, const Eigen::VectorXd& rep, int t) const {
    return forward(g, rep, t).distributions();
  }

 private:
  struct Layer {
    nn::Linear q, k, v, e_mul, e_add, node_out, edge_to_node, edge_out, path_a, path_b, path_out;
    nn::LayerNorm node_norm1, edge_norm1, node_norm2, edge_norm2;
    CrossAttention cross_x, cross_e;
    nn::Mlp node_ffn, edge_ffn;
  };

  DenoiserConfig cfg_;
  int a_ = 1;
  int b_ = 2;
  int d_h_ = 1;
  int steps_ = 1;
  nn::ParameterStore store_;
  nn::Linear node_in_, edge_in_;
  nn::Mlp time_;
  nn::Linear time_x_, time_e_;
  std::vector<Layer> layers_;
  nn::Mlp node_head_, edge_head_;
};

// Node cross-entropies plus edge cross-entropies over ordered off-diagonal pairs.
inline ad::Var loss_gg(const GraphSample& g0, const DenoiserOutput& out) {
  const int n = g0.num_nodes();
  auto node_t = std::make_shared<std::vector<int>>(g0.nodes());
  auto edge_t = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) (*edge_t)[static_cast<std::size_t>(i * n + j)] = g0.edge(i, j);
    }
  }
  return ad::add(ad::negative_pick_sum(ad::log_softmax_rows(out.node_logits), node_t),
                 ad::negative_pick_sum(ad::log_softmax_rows(out.edge_logits), edge_t));
}

// Same objective evaluated on explicit distributions.
inline double loss_gg(const GraphSample& g0, const DistributionPair& pred) {
  const int n = g0.num_nodes();
  if (pred.num_nodes() != n) throw std::invalid_argument("loss_gg: size mismatch");
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    loss -= std::log(pred.node(i, g0.node(i)));
    for (int j = 0; j < n; ++j) {
      if (i != j) loss -= std::log(pred.edge(static_cast<ad::Index>(i) * n + j, g0.edge(i, j)));
    }
  }
  return loss;
}

// ||h_eta(p_X, p_E) - h_target||^2 with h_target constant.
inline ad::Var loss_ag(const GraphEncoder& enc, const DenoiserOutput& out, const Eigen::VectorXd& h_target) {
  return ad::squared_norm(ad::sub(enc.forward(out.node_prob, out.edge_prob), row_var(h_target)));
}

}  // namespace graphrcg

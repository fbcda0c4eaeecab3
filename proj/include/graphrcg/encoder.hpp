#pragma once
// Graph encoder h_eta: message passing with edge-type specific weights, sum
// (or mean) pooling, projection to d_h and a final normalization.
//
// The forward pass works on dense one-hot or simplex-valued inputs so the same
// code serves hard graphs and predicted distributions.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphrcg/autodiff.hpp"
#include "graphrcg/graph.hpp"
#include "graphrcg/nn.hpp"

namespace graphrcg {

enum class Pooling { Sum, Mean };

inline Pooling pooling_from_string(const std::string& s) {
  if (s == "sum") return Pooling::Sum;
  if (s == "mean") return Pooling::Mean;
  throw std::invalid_argument("unknown pooling '" + s + "'");
}

inline std::string to_string(Pooling p) { return p == Pooling::Sum ? "sum" : "mean"; }

struct EncoderConfig {
  int d_h = 256;
  int layers = 3;
  int hidden = 128;
  Pooling pooling = Pooling::Sum;

  void validate() const {
    if (d_h < 1) throw std::invalid_argument("encoder.d_h must be >= 1");
    if (layers < 1) throw std::invalid_argument("encoder.layers must be >= 1");
    if (hidden < 1) throw std::invalid_argument("encoder.hidden must be >= 1");
  }
};

class GraphEncoder {
 public:
  GraphEncoder() = default;
  GraphEncoder(const EncoderConfig& cfg, int node_types, int edge_types, Engine& rng)
      : cfg_(cfg), a_(node_types), b_(edge_types) {
    cfg.validate();
    if (node_types < 1 || edge_types < 2) throw std::invalid_argument("encoder needs a >= 1 and b >= 2");
    input_ = nn::Linear(store_, "encoder.input", a_, cfg.hidden, rng);
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "encoder.layer" + std::to_string(l);
      Layer layer;
      for (int k = 1; k < b_; ++k) {
        layer.edge_weights.push_back(
            store_.create(p + ".edge" + std::to_string(k), nn::xavier_uniform(cfg.hidden, cfg.hidden, rng)));
      }
      layer.update = nn::Mlp(store_, p + ".update", 2 * cfg.hidden, cfg.hidden, cfg.hidden, rng);
      layer.norm = nn::LayerNorm(store_, p + ".norm", cfg.hidden);
      layers_.push_back(std::move(layer));
    }
    readout_ = nn::Mlp(store_, "encoder.readout", cfg.hidden, cfg.hidden, cfg.d_h, rng);
  }

  const EncoderConfig& config() const { return cfg_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  int node_types() const { return a_; }
  int edge_types() const { return b_; }

  // x: n x a, e: (n*n) x b with row i*n + j; returns 1 x d_h.
  ad::Var forward(const ad::Var& x, const ad::Var& e) const {
    const ad::Index n = x.rows();
    if (n < 1 || x.cols() != a_ || e.cols() != b_ || e.rows() != n * n) {
      throw std::invalid_argument("encoder: input dimension mismatch");
    }
    ad::Var h = input_(x);
    std::vector<ad::Var> adjacency;
    for (int k = 1; k < b_; ++k) adjacency.push_back(ad::reshape(ad::slice_cols(e, k, 1), n, n));
    for (const Layer& layer : layers_) {
      ad::Var msg;
      for (std::size_t k = 0; k < adjacency.size(); ++k) {
        ad::Var m = ad::matmul(ad::matmul(adjacency[k], h), layer.edge_weights[k]);
        msg = msg.defined() ? ad::add(msg, m) : m;
      }
      h = layer.norm(ad::add(h, layer.update(ad::concat_cols(h, msg))));
    }
    ad::Var pooled = ad::sum_rows(h);
    if (cfg_.pooling == Pooling::Mean) pooled = ad::scale(pooled, 1.0 / static_cast<double>(n));
    // Unit-scale output keeps the alignment objective from collapsing h to 0.
    return ad::layer_norm_rows(readout_(pooled));
  }

  ad::Var forward(const GraphSample& g) const {
    check_vocabulary(g);
    return forward(ad::Var(g.node_one_hot()), ad::Var(g.edge_one_hot()));
  }

  Eigen::VectorXd encode(const GraphSample& g) const {
    return forward(g).value().row(0).transpose();
  }

  Eigen::VectorXd encode(const ad::Matrix& x, const ad::Matrix& e) const {
    return forward(ad::Var(x), ad::Var(e)).value().row(0).transpose();
  }

  void check_vocabulary(const GraphSample& g) const {
    if (g.node_types() != a_ || g.edge_types() != b_) throw std::invalid_argument("encoder: type vocabulary mismatch");
  }

 private:
  struct Layer {
    std::vector<ad::Var> edge_weights;
    nn::Mlp update;
    nn::LayerNorm norm;
  };

  EncoderConfig cfg_;
  int a_ = 1;
  int b_ = 2;
  nn::ParameterStore store_;
  nn::Linear input_;
  std::vector<Layer> layers_;
  nn::Mlp readout_;
};

inline ad::Var row_var(const Eigen::VectorXd& v) { return ad::Var(ad::Matrix(v.transpose())); }

// ||h_t - h_eta(G_t)||^2 with h_t held constant.
inline ad::Var alignment_loss_ar(const GraphEncoder& enc, const Eigen::VectorXd& h_t, const GraphSample& g_t) {
  return ad::squared_norm(ad::sub(enc.forward(g_t), row_var(h_t)));
}

}  // namespace graphrcg

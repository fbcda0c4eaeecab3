#pragma once
// Reverse graph chain guided by representations.
//
// Every sample i owns three streams derived from (seed, i): one for its size,
// one for the representation chain and one for the graph chain. Modes that
// differ only in where the guiding vector comes from therefore see identical
// graph-chain randomness.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphrcg/config.hpp"
#include "graphrcg/model.hpp"
#include "graphrcg/noise.hpp"
#include "graphrcg/rdm.hpp"

namespace graphrcg {

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepTrace {
  int t = 0;
  double node_entropy = 0.0;  // mean over nodes of H(p~X_i)
  double edge_entropy = 0.0;  // mean over off-diagonal pairs of H(p~E_ij)
};

struct SampleResult {
  GraphSample graph;
  RepresentationTrajectory trajectory;  // empty for modes that do not sample one
  std::vector<StepTrace> trace;
};

// Called with every intermediate G_t, from G_T down to G_0.
using ChainObserver = std::function<void(int t, const GraphSample&)>;

enum class SampleStream : std::uint64_t { Size = 0, Representation = 1, Graph = 2 };

inline Engine sample_engine(std::uint64_t seed, std::size_t index, SampleStream s) {
  return Engine(derive_seed(seed, index, static_cast<std::uint64_t>(s)));
}

inline void require_trained(const GraphRcgModel& m, const SamplerConfig& cfg) {
  if (cfg.allow_untrained) return;
  if (!m.trained("guidance")) throw SamplingError("untrained checkpoint: guidance phase has not run");
  if (cfg.mode != GuidanceMode::Unconditional && !m.trained("modeling")) {
    throw SamplingError("untrained checkpoint: modeling phase has not run");
  }
}

namespace detail {

inline double row_entropy(const ad::Matrix& m, ad::Index r) {
  double h = 0.0;
  for (ad::Index k = 0; k < m.cols(); ++k) {
    const double p = m(r, k);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline StepTrace trace_step(int t, const DistributionPair& p) {
  const int n = p.num_nodes();
  StepTrace s;
  s.t = t;
  for (int i = 0; i < n; ++i) s.node_entropy += row_entropy(p.node, i) / n;
  if (n > 1) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) s.edge_entropy += row_entropy(p.edge, static_cast<ad::Index>(i) * n + j) / (n * (n - 1.0));
      }
    }
  }
  return s;
}

}  // namespace detail

// Gradient of ||target - h_eta(X, E)||^2 with respect to the one-hot inputs of
// G_t: node rows n x a and pair rows (n*n) x b.
inline DistributionPair representation_distance_gradient(const GraphEncoder& enc, const GraphSample& gt,
                                                         const Eigen::VectorXd& target) {
  ad::GradMode on(true);
  // Parameters act as constants here so their gradient buffers stay untouched.
  std::vector<std::pair<ad::Var, bool>> flags;
  for (const auto& p : enc.parameters().params()) {
    ad::Var v = p.var;
    flags.emplace_back(v, v.requires_grad());
    v.set_requires_grad(false);
  }
  ad::Var x(gt.node_one_hot(), true);
  ad::Var e(gt.edge_one_hot(), true);
  ad::squared_norm(ad::sub(enc.forward(x, e), row_var(target))).backward();
  for (auto& [v, f] : flags) v.set_requires_grad(f);
  return {x.grad(), e.grad()};
}

// Multiplies unnormalized reverse weights by exp(-lambda <grad, G_{t-1}>). A
// pair's state enters the inner product through both (i, j) and (j, i).
inline void apply_gradient_guidance(DistributionPair& w, const DistributionPair& grad, double lambda) {
  const int n = w.num_nodes();
  auto reweight = [lambda](auto row, const ad::RowVector& g) {
    const ad::RowVector logit = -lambda * g;
    const double shift = logit.maxCoeff();
    for (ad::Index k = 0; k < row.size(); ++k) row(k) *= std::exp(logit(k) - shift);
  };
  for (int i = 0; i < n; ++i) reweight(w.node.row(i), grad.node.row(i));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto r = static_cast<ad::Index>(i) * n + j;
      const auto rt = static_cast<ad::Index>(j) * n + i;
      const ad::RowVector g = grad.edge.row(r) + grad.edge.row(rt);
      reweight(w.edge.row(r), g);
      w.edge.row(rt) = w.edge.row(r);
    }
  }
}

// Normalized distribution of G_{t-1} given G_t and the denoiser's clean
// prediction. With lambda > 0 the weights are tilted towards graphs whose
// encoding is closer to `target`.
inline DistributionPair reverse_distribution(const GraphRcgModel& m, const GraphSample& gt, int t,
                                             const DistributionPair& pred, ReverseMode mode, double lambda = 0.0,
                                             const Eigen::VectorXd* target = nullptr) {
  DistributionPair w = mode == ReverseMode::Posterior ? reverse_weights(gt, pred, t, t - 1, m.noise()) : pred;
  if (lambda != 0.0) {
    if (target == nullptr) throw std::invalid_argument("gradient guidance needs a target representation");
    apply_gradient_guidance(w, representation_distance_gradient(m.encoder(), gt, *target), lambda);
  }
  normalize_rows(w.node);
  normalize_rows(w.edge);
  return w;
}

// Supplies the conditioning vector for graph step t given the current G_t.
using GuideSource = std::function<Eigen::VectorXd(int t, const GraphSample& gt)>;

struct ChainOptions {
  ReverseMode reverse = ReverseMode::Posterior;
  double lambda = 0.0;
  // Target h_t for gradient guidance at step t.
  std::function<Eigen::VectorXd(int t)> gradient_target;
  bool trace = false;
  ChainObserver observer;
};

inline GraphSample run_reverse_chain(const GraphRcgModel& m, int n, const GuideSource& guide,
                                     const ChainOptions& opt, Engine& rng, std::vector<StepTrace>* trace = nullptr) {
  ad::GradMode off(false);
  const int a = m.stats().node_types, b = m.stats().edge_types;
  GraphSample g = sample_prior_graph(n, a, b, m.noise(), rng);
  if (opt.observer) opt.observer(m.steps(), g);
  for (int t = m.steps(); t >= 1; --t) {
    const DistributionPair pred = m.denoiser().predict_clean(g, guide(t, g), t);
    if (trace && opt.trace) trace->push_back(detail::trace_step(t, pred));
    std::optional<Eigen::VectorXd> target;
    if (opt.lambda != 0.0) target = opt.gradient_target(t);
    const DistributionPair dist =
        reverse_distribution(m, g, t, pred, opt.reverse, opt.lambda, target ? &*target : nullptr);
    g = sample_from_distribution(dist, a, b, rng);
    if (opt.observer) opt.observer(t - 1, g);
  }
  return g;
}

inline int sample_size(const GraphRcgModel& m, const SamplerConfig& cfg, std::size_t index) {
  Engine rng = sample_engine(cfg.seed, index, SampleStream::Size);
  return sample_graph_size(m.stats().size_histogram, rng);
}

inline RepresentationTrajectory sample_representation_trajectory(const GraphRcgModel& m, const SamplerConfig& cfg,
                                                                 std::size_t index) {
  ad::GradMode off(false);
  Engine rng = sample_engine(cfg.seed, index, SampleStream::Representation);
  return sample_trajectory(m.rdm(), m.schedule(), rng, cfg.ddim_stride);
}

inline ChainOptions chain_options(const SamplerConfig& cfg, const ChainObserver& observer) {
  ChainOptions o;
  o.reverse = cfg.reverse;
  o.trace = true;
  o.observer = observer;
  return o;
}

// Stepwise guidance from a given trajectory: graph step t is conditioned on
// the clean estimate made at representation step t.
inline SampleResult sample_with_trajectory(const GraphRcgModel& m, const RepresentationTrajectory& traj,
                                           const SamplerConfig& cfg, std::size_t index = 0,
                                           const ChainObserver& observer = {}) {
  require_trained(m, cfg);
  if (traj.steps() != m.steps() || traj.dim() != m.rep_dim()) {
    throw std::invalid_argument("trajectory does not match the model");
  }
  SampleResult r;
  r.trajectory = traj;
  Engine rng = sample_engine(cfg.seed, index, SampleStream::Graph);
  r.graph = run_reverse_chain(
      m, sample_size(m, cfg, index), [&](int t, const GraphSample&) { return traj.guide(t); },
      chain_options(cfg, observer), rng, &r.trace);
  return r;
}

// The same clean representation at every step.
inline SampleResult fixed_rep_sample(const GraphRcgModel& m, const Eigen::VectorXd& h0, const SamplerConfig& cfg,
                                     std::size_t index = 0, const ChainObserver& observer = {}) {
  require_trained(m, cfg);
  if (h0.size() != m.rep_dim()) throw std::invalid_argument("fixed representation has the wrong dimension");
  SampleResult r;
  Engine rng = sample_engine(cfg.seed, index, SampleStream::Graph);
  r.graph = run_reverse_chain(
      m, sample_size(m, cfg, index), [&](int, const GraphSample&) { return h0; }, chain_options(cfg, observer), rng,
      &r.trace);
  return r;
}

inline SampleResult interpolate_sample(const GraphRcgModel& m, const RepresentationTrajectory& a,
                                       const RepresentationTrajectory& b, double alpha, const SamplerConfig& cfg,
                                       std::size_t index = 0, const ChainObserver& observer = {}) {
  return sample_with_trajectory(m, interpolate_trajectories(a, b, alpha), cfg, index, observer);
}

// Unconditional denoiser (zero conditioning) tilted by the encoder towards the
// trajectory's h_t at every step.
inline SampleResult gradient_guided_sample(const GraphRcgModel& m, const RepresentationTrajectory& traj,
                                           double lambda, const SamplerConfig& cfg, std::size_t index = 0,
                                           const ChainObserver& observer = {}) {
  require_trained(m, cfg);
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  SampleResult r;
  r.trajectory = traj;
  ChainOptions opt = chain_options(cfg, observer);
  opt.lambda = lambda;
  opt.gradient_target = [&traj](int t) { return traj.state(t); };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.rep_dim());
  Engine rng = sample_engine(cfg.seed, index, SampleStream::Graph);
  r.graph = run_reverse_chain(
      m, sample_size(m, cfg, index), [&](int, const GraphSample&) { return zero; }, opt, rng, &r.trace);
  return r;
}

// One graph in the configured mode. `fixed` overrides the representation used
// by fixed_rep mode (otherwise the final entry of a sampled trajectory).
inline SampleResult sample_graph(const GraphRcgModel& m, const SamplerConfig& cfg, std::size_t index = 0,
                                 const Eigen::VectorXd* fixed = nullptr, const ChainObserver& observer = {}) {
  require_trained(m, cfg);
  switch (cfg.mode) {
    case GuidanceMode::Stepwise:
      return sample_with_trajectory(m, sample_representation_trajectory(m, cfg, index), cfg, index, observer);
    case GuidanceMode::StepwiseEncode: {
      SampleResult r;
      Engine rng = sample_engine(cfg.seed, index, SampleStream::Graph);
      r.graph = run_reverse_chain(
          m, sample_size(m, cfg, index),
          [&m](int t, const GraphSample& gt) { return m.rdm().denoise(m.encoder().encode(gt), t); },
          chain_options(cfg, observer), rng, &r.trace);
      return r;
    }
    case GuidanceMode::FixedRep: {
      if (fixed) return fixed_rep_sample(m, *fixed, cfg, index, observer);
      const RepresentationTrajectory traj = sample_representation_trajectory(m, cfg, index);
      SampleResult r = fixed_rep_sample(m, traj.final_representation(), cfg, index, observer);
      r.trajectory = traj;
      return r;
    }
    case GuidanceMode::Gradient:
      return gradient_guided_sample(m, sample_representation_trajectory(m, cfg, index), cfg.lambda, cfg, index,
                                    observer);
    case GuidanceMode::Unconditional: {
      const RepresentationTrajectory none;
      SampleResult r = gradient_guided_sample(m, none, 0.0, cfg, index, observer);
      r.trajectory = RepresentationTrajectory();
      return r;
    }
  }
  throw std::logic_error("unhandled guidance mode");
}

// Samples first..first+count-1 in the configured mode.
inline std::vector<GraphSample> sample_graphs(const GraphRcgModel& m, const SamplerConfig& cfg, int count,
                                              std::size_t first = 0) {
  std::vector<GraphSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_graph(m, cfg, first + static_cast<std::size_t>(i)).graph);
  return out;
}

}  // namespace graphrcg

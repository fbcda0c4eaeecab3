#pragma once
// Forward noising for graphs (categorical Markov kernels) and representations
// (Gaussian), plus the reverse-step posterior used by the sampler.
//
// Every kernel has the form  Q = a I + (1 - a) 1 pi^T  with pi the stationary
// distribution: the dataset marginal (default), uniform, or absorbing. The
// cumulative kernel from 0 to t is the same form with a = alpha_bar(t).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "graphrcg/distribution.hpp"
#include "graphrcg/graph.hpp"
#include "graphrcg/random.hpp"

namespace graphrcg {

inline constexpr double kAlphaBarFloor = 1e-9;

// cos(0.5 pi (t/T + s) / (1 + s))^2, floored at kAlphaBarFloor.
inline double cosine_alpha_bar(int t, int total_steps, double s) {
  const double pi = std::acos(-1.0);
  const double x = 0.5 * pi * (static_cast<double>(t) / total_steps + s) / (1.0 + s);
  const double c = std::cos(x);
  return std::max(c * c, kAlphaBarFloor);
}

// Cosine schedule. alpha_bar(0) is pinned to 1 so that the cumulative kernel at
// t = 0 is the identity and the per-step alphas telescope exactly to alpha_bar.
class NoiseSchedule {
 public:
  NoiseSchedule() : NoiseSchedule(1000) {}
  explicit NoiseSchedule(int total_steps, double s = 0.008) : steps_(total_steps), s_(s) {
    if (total_steps < 1) throw std::invalid_argument("schedule needs T >= 1");
    if (!(s > 0.0)) throw std::invalid_argument("schedule offset s must be > 0");
    alpha_bar_.resize(static_cast<std::size_t>(total_steps) + 1);
    alpha_bar_[0] = 1.0;
    for (int t = 1; t <= total_steps; ++t) alpha_bar_[static_cast<std::size_t>(t)] = cosine_alpha_bar(t, total_steps, s);
  }

  int steps() const { return steps_; }
  double offset() const { return s_; }

  double alpha_bar(int t) const {
    check(t, 0);
    return alpha_bar_[static_cast<std::size_t>(t)];
  }
  double beta_bar(int t) const { return 1.0 - alpha_bar(t); }

  // Per-step retention alpha^t = alpha_bar(t) / alpha_bar(t-1), t >= 1.
  double alpha(int t) const {
    check(t, 1);
    return alpha_bar_[static_cast<std::size_t>(t)] / alpha_bar_[static_cast<std::size_t>(t) - 1];
  }
  double beta(int t) const { return 1.0 - alpha(t); }

  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  void check(int t, int lo) const {
    if (t < lo || t > steps_) throw std::out_of_range("timestep " + std::to_string(t) + " out of range");
  }
  int steps_;
  double s_;
  std::vector<double> alpha_bar_;
};

enum class KernelKind { Marginal, Uniform, Absorbing };

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "marginal") return KernelKind::Marginal;
  if (s == "uniform") return KernelKind::Uniform;
  if (s == "absorbing") return KernelKind::Absorbing;
  throw std::invalid_argument("unknown kernel kind '" + s + "'");
}

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Marginal: return "marginal";
    case KernelKind::Uniform: return "uniform";
    case KernelKind::Absorbing: return "absorbing";
  }
  return "marginal";
}

inline void require_probability_vector(const Eigen::VectorXd& p) {
  if (p.size() == 0 || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("marginal vector is not a normalized probability vector");
  }
}

inline Eigen::VectorXd stationary_distribution(KernelKind kind, const Eigen::VectorXd& marginal) {
  const auto k = marginal.size();
  switch (kind) {
    case KernelKind::Marginal: return marginal;
    case KernelKind::Uniform: return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    case KernelKind::Absorbing: {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(k);
      e(0) = 1.0;
      return e;
    }
  }
  return marginal;
}

// a I + (1 - a) 1 p^T
inline ad::Matrix mix_with_stationary(double a, const Eigen::VectorXd& p) {
  const auto k = p.size();
  ad::Matrix q = ad::Matrix::Identity(k, k) * a;
  q.rowwise() += ((1.0 - a) * p).transpose();
  return q;
}

// Single-step kernel Q_t, t in [1, T].
inline ad::Matrix transition_matrix(const NoiseSchedule& schedule, int t, const Eigen::VectorXd& p) {
  require_probability_vector(p);
  return mix_with_stationary(schedule.alpha(t), p);
}

// Closed-form product Q_1 ... Q_t, t in [0, T].
inline ad::Matrix cumulative_transition(const NoiseSchedule& schedule, int t, const Eigen::VectorXd& p) {
  require_probability_vector(p);
  return mix_with_stationary(schedule.alpha_bar(t), p);
}

// Kernel from step s to step t > s: Q_{s+1} ... Q_t.
inline ad::Matrix skip_transition(const NoiseSchedule& schedule, int s, int t, const Eigen::VectorXd& p) {
  if (s < 0 || t <= s) throw std::out_of_range("skip_transition requires 0 <= s < t");
  require_probability_vector(p);
  return mix_with_stationary(schedule.alpha_bar(t) / schedule.alpha_bar(s), p);
}

// Schedule plus stationary distributions for nodes and edges.
struct GraphNoiseModel {
  NoiseSchedule schedule;
  Eigen::VectorXd node_pi;
  Eigen::VectorXd edge_pi;
  KernelKind kind = KernelKind::Marginal;

  GraphNoiseModel() = default;
  GraphNoiseModel(NoiseSchedule s, const Marginals& m, KernelKind k = KernelKind::Marginal)
      : schedule(std::move(s)),
        node_pi(stationary_distribution(k, m.node)),
        edge_pi(stationary_distribution(k, m.edge)),
        kind(k) {
    require_probability_vector(node_pi);
    require_probability_vector(edge_pi);
  }

  int steps() const { return schedule.steps(); }
};

// Draws each node from row g0.node(i) of qx and each unordered pair from row
// g0.edge(i, j) of qe, mirroring the upper triangle.
inline GraphSample noise_graph_with_kernels(const GraphSample& g0, const ad::Matrix& qx, const ad::Matrix& qe,
                                            Engine& rng) {
  const int n = g0.num_nodes();
  std::vector<int> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)] = sample_categorical(qx.row(g0.node(i)), rng);
  EdgeTypeMatrix e = EdgeTypeMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) e(i, j) = e(j, i) = sample_categorical(qe.row(g0.edge(i, j)), rng);
  }
  return GraphSample(g0.node_types(), g0.edge_types(), std::move(nodes), std::move(e));
}

inline GraphSample noise_graph(const GraphSample& g0, int t, const GraphNoiseModel& model, Engine& rng) {
  if (t < 1 || t > model.steps()) throw std::out_of_range("noise_graph: t out of range");
  return noise_graph_with_kernels(g0, cumulative_transition(model.schedule, t, model.node_pi),
                                  cumulative_transition(model.schedule, t, model.edge_pi), rng);
}

inline GraphSample noise_graph(const GraphSample& g0, int t, const GraphNoiseModel& model, std::uint64_t seed) {
  Engine rng(seed);
  return noise_graph(g0, t, model, rng);
}

// G_T drawn independently from the stationary distributions.
inline GraphSample sample_prior_graph(int n, int node_types, int edge_types, const GraphNoiseModel& model,
                                      Engine& rng) {
  std::vector<int> nodes(static_cast<std::size_t>(n));
  for (auto& v : nodes) v = sample_categorical(model.node_pi, rng);
  EdgeTypeMatrix e = EdgeTypeMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) e(i, j) = e(j, i) = sample_categorical(model.edge_pi, rng);
  }
  return GraphSample(node_types, edge_types, std::move(nodes), std::move(e));
}

struct NoisedRepresentation {
  Eigen::VectorXd noised;
  Eigen::VectorXd noise;
};

// h_t = sqrt(alpha_bar) h0 + sqrt(1 - alpha_bar) eps for a supplied eps.
inline Eigen::VectorXd noise_representation_with(const Eigen::VectorXd& h0, int t, const NoiseSchedule& schedule,
                                                 const Eigen::VectorXd& eps) {
  if (t < 1 || t > schedule.steps()) throw std::out_of_range("noise_representation: t out of range");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * h0 + std::sqrt(1.0 - ab) * eps;
}

inline NoisedRepresentation noise_representation(const Eigen::VectorXd& h0, int t, const NoiseSchedule& schedule,
                                                 Engine& rng) {
  Eigen::VectorXd eps = standard_normal_vector(rng, h0.size());
  return {noise_representation_with(h0, t, schedule, eps), std::move(eps)};
}

inline NoisedRepresentation noise_representation(const Eigen::VectorXd& h0, int t, const NoiseSchedule& schedule,
                                                 std::uint64_t seed) {
  Engine rng(seed);
  return noise_representation(h0, t, schedule, rng);
}

// Unnormalized posterior weights over x_s for one categorical variable:
//   sum_j pred[j] * q(x_s | x_t = current, x_0 = j)
// with q(x_s = k | x_t, x_0 = j) = Qts[k, x_t] Qbar_s[j, k] / Qbar_t[j, x_t].
inline Eigen::VectorXd posterior_weights(int current, const Eigen::VectorXd& pred, const ad::Matrix& step_kernel,
                                         const ad::Matrix& cum_prev, const ad::Matrix& cum_now) {
  const auto k = pred.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double denom = cum_now(j, current);
    // x_0 = j cannot have produced x_t (possible only for absorbing kernels).
    if (pred(j) == 0.0 || denom == 0.0) continue;
    for (Eigen::Index s = 0; s < k; ++s) w(s) += pred(j) * step_kernel(s, current) * cum_prev(j, s) / denom;
  }
  return w;
}

// Unnormalized reverse distributions from step t to step s < t (s = t - 1 is
// the ordinary single step). Node rows n x a, edge rows (n*n) x b.
inline DistributionPair reverse_weights(const GraphSample& gt, const DistributionPair& pred, int t, int s,
                                        const GraphNoiseModel& model) {
  const int n = gt.num_nodes();
  if (pred.num_nodes() != n) throw std::invalid_argument("reverse_posterior: size mismatch");
  const NoiseSchedule& sch = model.schedule;
  const ad::Matrix qx = skip_transition(sch, s, t, model.node_pi);
  const ad::Matrix qe = skip_transition(sch, s, t, model.edge_pi);
  const ad::Matrix qx_prev = cumulative_transition(sch, s, model.node_pi);
  const ad::Matrix qe_prev = cumulative_transition(sch, s, model.edge_pi);
  const ad::Matrix qx_now = cumulative_transition(sch, t, model.node_pi);
  const ad::Matrix qe_now = cumulative_transition(sch, t, model.edge_pi);

  DistributionPair w;
  w.node.resize(n, gt.node_types());
  for (int i = 0; i < n; ++i) {
    w.node.row(i) = posterior_weights(gt.node(i), pred.node.row(i).transpose(), qx, qx_prev, qx_now).transpose();
  }
  w.edge = ad::Matrix::Zero(static_cast<ad::Index>(n) * n, gt.edge_types());
  for (int i = 0; i < n; ++i) {
    w.edge(static_cast<ad::Index>(i) * n + i, kNoEdge) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const auto r = static_cast<ad::Index>(i) * n + j;
      w.edge.row(r) = posterior_weights(gt.edge(i, j), pred.edge.row(r).transpose(), qe, qe_prev, qe_now).transpose();
      w.edge.row(static_cast<ad::Index>(j) * n + i) = w.edge.row(r);
    }
  }
  return w;
}

inline void normalize_rows(ad::Matrix& m) {
  for (ad::Index r = 0; r < m.rows(); ++r) {
    const double z = m.row(r).sum();
    if (!(z > 0.0)) throw std::runtime_error("reverse posterior: zero normalizer");
    m.row(r) /= z;
  }
}

inline DistributionPair reverse_posterior(const GraphSample& gt, const DistributionPair& pred, int t, int s,
                                          const GraphNoiseModel& model) {
  DistributionPair w = reverse_weights(gt, pred, t, s, model);
  normalize_rows(w.node);
  normalize_rows(w.edge);
  return w;
}

inline DistributionPair reverse_posterior(const GraphSample& gt, const DistributionPair& pred, int t,
                                          const GraphNoiseModel& model) {
  return reverse_posterior(gt, pred, t, t - 1, model);
}

// Draws a graph from per-node and upper-triangle per-pair distributions
// (weights need not be normalized); diagonal stays no-edge.
inline GraphSample sample_from_distribution(const DistributionPair& dist, int node_types, int edge_types,
                                            Engine& rng) {
  const int n = dist.num_nodes();
  std::vector<int> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)] = sample_categorical(dist.node.row(i), rng);
  EdgeTypeMatrix e = EdgeTypeMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      e(i, j) = e(j, i) = sample_categorical(dist.edge.row(static_cast<ad::Index>(i) * n + j), rng);
    }
  }
  return GraphSample(node_types, edge_types, std::move(nodes), std::move(e));
}

}  // namespace graphrcg

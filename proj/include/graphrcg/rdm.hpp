#pragma once
// Representation diffusion model f_gamma: a residual MLP that predicts the
// clean representation h_0 from (h_t, t), and its deterministic DDIM sampler.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphrcg/autodiff.hpp"
#include "graphrcg/noise.hpp"
#include "graphrcg/nn.hpp"
#include "graphrcg/random.hpp"

namespace graphrcg {

struct RdmConfig {
  int d_h = 256;
  int blocks = 12;
  int hidden = 512;
  int time_dim = 128;

  void validate() const {
    if (d_h < 1) throw std::invalid_argument("rdm.d_h must be >= 1");
    if (blocks < 1) throw std::invalid_argument("rdm.blocks must be >= 1");
    if (hidden < 1) throw std::invalid_argument("rdm.hidden must be >= 1");
    if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("rdm.time_dim must be even and >= 2");
  }
};

class RepresentationDenoiser {
 public:
  RepresentationDenoiser() = default;
  RepresentationDenoiser(const RdmConfig& cfg, int total_steps, Engine& rng) : cfg_(cfg), steps_(total_steps) {
    cfg.validate();
    input_ = nn::Linear(store_, "rdm.input", cfg.d_h, cfg.hidden, rng);
    time_ = nn::Mlp(store_, "rdm.time", cfg.time_dim, cfg.hidden, cfg.hidden, rng);
    for (int b = 0; b < cfg.blocks; ++b) {
      const std::string p = "rdm.block" + std::to_string(b);
      Block block;
      block.norm = nn::LayerNorm(store_, p + ".norm", cfg.hidden);
      block.in = nn::Linear(store_, p + ".in", cfg.hidden, cfg.hidden, rng);
      block.time = nn::Linear(store_, p + ".time", cfg.hidden, cfg.hidden, rng);
      block.out = nn::Linear(store_, p + ".out", cfg.hidden, cfg.hidden, rng);
      blocks_.push_back(std::move(block));
    }
    out_norm_ = nn::LayerNorm(store_, "rdm.out_norm", cfg.hidden);
    output_ = nn::Linear(store_, "rdm.output", cfg.hidden, cfg.d_h, rng, /*zero_init=*/true);
  }

  const RdmConfig& config() const { return cfg_; }
  int steps() const { return steps_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  // h: B x d_h, one timestep per row. Returns the clean estimate, B x d_h.
  ad::Var forward(const ad::Var& h, const std::vector<int>& t) const {
    if (h.cols() != cfg_.d_h) throw std::invalid_argument("rdm: representation dimension mismatch");
    if (static_cast<ad::Index>(t.size()) != h.rows()) throw std::invalid_argument("rdm: one timestep per row");
    for (int s : t) {
      if (s < 1 || s > steps_) throw std::out_of_range("rdm: timestep " + std::to_string(s) + " out of range");
    }
    const ad::Var temb = ad::silu(time_(ad::Var(nn::timestep_embedding(t, cfg_.time_dim))));
    ad::Var x = input_(h);
    for (const Block& b : blocks_) {
      ad::Var y = b.in(b.norm(x));
      y = ad::silu(ad::add(y, b.time(temb)));
      x = ad::add(x, b.out(y));
    }
    return output_(out_norm_(x));
  }

  Eigen::VectorXd denoise(const Eigen::VectorXd& h_t, int t) const {
    return forward(ad::Var(ad::Matrix(h_t.transpose())), {t}).value().row(0).transpose();
  }

 private:
  struct Block {
    nn::LayerNorm norm;
    nn::Linear in;
    nn::Linear time;
    nn::Linear out;
  };

  RdmConfig cfg_;
  int steps_ = 1;
  nn::ParameterStore store_;
  nn::Linear input_;
  nn::Mlp time_;
  std::vector<Block> blocks_;
  nn::LayerNorm out_norm_;
  nn::Linear output_;
};

// Mean over the batch of ||h0 - f(h_t, t)||^2 with h_t = sqrt(ab) h0 + sqrt(1 - ab) eps.
// h0 and eps are B x d_h.
inline ad::Var loss_rg(const RepresentationDenoiser& model, const NoiseSchedule& schedule, const ad::Matrix& h0,
                       const std::vector<int>& t, const ad::Matrix& eps) {
  ad::Matrix ht(h0.rows(), h0.cols());
  for (ad::Index r = 0; r < h0.rows(); ++r) {
    const int s = t[static_cast<std::size_t>(r)];
    ht.row(r) = noise_representation_with(h0.row(r).transpose(), s, schedule, eps.row(r).transpose()).transpose();
  }
  const ad::Var pred = model.forward(ad::Var(ht), t);
  return ad::scale(ad::squared_norm(ad::sub(pred, ad::Var(h0))), 1.0 / static_cast<double>(h0.rows()));
}

// Draws t and eps for every row from rng (t first, then eps, row by row).
inline ad::Var loss_rg(const RepresentationDenoiser& model, const NoiseSchedule& schedule, const ad::Matrix& h0,
                       Engine& rng) {
  std::vector<int> t(static_cast<std::size_t>(h0.rows()));
  ad::Matrix eps(h0.rows(), h0.cols());
  for (ad::Index r = 0; r < h0.rows(); ++r) {
    t[static_cast<std::size_t>(r)] = uniform_int(rng, 1, schedule.steps());
    eps.row(r) = standard_normal_vector(rng, h0.cols()).transpose();
  }
  return loss_rg(model, schedule, h0, t, eps);
}

// A sampled representation chain. states[t] is h_t for every visited t
// (T, T - stride, ..., 0); guide(t) is the clean estimate f(h_u, u) made at
// the visited step u >= t closest to t, i.e. the representation that guides
// graph step t. guide(0) is the final h_0.
class RepresentationTrajectory {
 public:
  RepresentationTrajectory() = default;
  RepresentationTrajectory(int total_steps, int stride) : steps_(total_steps), stride_(stride) {
    if (total_steps < 1 || stride < 1 || total_steps % stride != 0) {
      throw std::invalid_argument("trajectory: stride must divide T");
    }
    states_.resize(static_cast<std::size_t>(total_steps) + 1);
    guides_.resize(static_cast<std::size_t>(total_steps) + 1);
  }

  // Every timestep guided by the same vector.
  static RepresentationTrajectory constant(int total_steps, const Eigen::VectorXd& h) {
    RepresentationTrajectory tr(total_steps, 1);
    for (int t = 0; t <= total_steps; ++t) tr.set(t, h, h);
    return tr;
  }

  int steps() const { return steps_; }
  int stride() const { return stride_; }
  std::size_t length() const { return states_.size(); }
  int dim() const { return states_.empty() ? 0 : static_cast<int>(states_.back().size()); }

  void set(int t, Eigen::VectorXd state, Eigen::VectorXd guide) {
    check(t);
    states_[static_cast<std::size_t>(t)] = std::move(state);
    guides_[static_cast<std::size_t>(t)] = std::move(guide);
  }

  bool visited(int t) const { return t % stride_ == 0; }

  const Eigen::VectorXd& state(int t) const {
    check(t);
    return states_[static_cast<std::size_t>(round_up(t))];
  }

  const Eigen::VectorXd& guide(int t) const {
    check(t);
    return guides_[static_cast<std::size_t>(round_up(t))];
  }

  const Eigen::VectorXd& final_representation() const { return states_.front(); }

  // Writes "t v_1 ... v_d" lines, t descending, for visited timesteps.
  void dump(std::ostream& os, bool guides = false) const {
    os.precision(17);
    for (int t = steps_; t >= 0; t -= stride_) {
      os << t;
      const Eigen::VectorXd& v = guides ? guide(t) : state(t);
      for (Eigen::Index k = 0; k < v.size(); ++k) os << ' ' << v(k);
      os << '\n';
    }
  }

 private:
  void check(int t) const {
    if (t < 0 || t > steps_) throw std::out_of_range("trajectory: timestep out of range");
  }
  int round_up(int t) const { return ((t + stride_ - 1) / stride_) * stride_; }

  int steps_ = 0;
  int stride_ = 1;
  std::vector<Eigen::VectorXd> states_;
  std::vector<Eigen::VectorXd> guides_;
};

// Per-timestep (1 - alpha) A + alpha B of two trajectories.
inline RepresentationTrajectory interpolate_trajectories(const RepresentationTrajectory& a,
                                                         const RepresentationTrajectory& b, double alpha) {
  if (a.steps() != b.steps() || a.stride() != b.stride() || a.dim() != b.dim()) {
    throw std::invalid_argument("interpolation: trajectory length mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("interpolation: alpha must lie in [0, 1]");
  RepresentationTrajectory out(a.steps(), a.stride());
  for (int t = 0; t <= a.steps(); t += a.stride()) {
    out.set(t, (1.0 - alpha) * a.state(t) + alpha * b.state(t), (1.0 - alpha) * a.guide(t) + alpha * b.guide(t));
  }
  return out;
}

// Deterministic DDIM (eta = 0) from h_T ~ N(0, I).
inline RepresentationTrajectory sample_trajectory(const RepresentationDenoiser& model, const NoiseSchedule& schedule,
                                                  Engine& rng, int stride = 1) {
  const int T = schedule.steps();
  if (model.steps() != T) throw std::invalid_argument("ddim: schedule length differs from the model's");
  RepresentationTrajectory tr(T, stride);
  Eigen::VectorXd h = standard_normal_vector(rng, model.config().d_h);
  for (int t = T; t >= stride; t -= stride) {
    const Eigen::VectorXd h0 = model.denoise(h, t);
    tr.set(t, h, h0);
    const double ab = schedule.alpha_bar(t);
    const Eigen::VectorXd eps = (h - std::sqrt(ab) * h0) / std::sqrt(1.0 - ab);
    const double ab_prev = schedule.alpha_bar(t - stride);
    h = std::sqrt(ab_prev) * h0 + std::sqrt(1.0 - ab_prev) * eps;
  }
  tr.set(0, h, h);
  return tr;
}

inline RepresentationTrajectory sample_trajectory(const RepresentationDenoiser& model, const NoiseSchedule& schedule,
                                                  std::uint64_t seed, int stride = 1) {
  Engine rng(seed);
  return sample_trajectory(model, schedule, rng, stride);
}

}  // namespace graphrcg

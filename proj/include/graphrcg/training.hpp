#pragma once
// Two-phase training.
//
// Modeling: per iteration, one update of the representation denoiser on
// L_RG, then one update of the encoder on L_AR, in that order.
// Guidance: encoder and representation denoiser frozen; the graph denoiser is
// updated on L_GG + lambda_AG * L_AG.
//
// All randomness comes from one engine whose state is checkpointed, so a
// resumed run continues bit-identically.

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphrcg/checkpoint.hpp"
#include "graphrcg/config.hpp"
#include "graphrcg/metrics.hpp"
#include "graphrcg/model.hpp"
#include "graphrcg/optim.hpp"
#include "graphrcg/sampler.hpp"

namespace graphrcg {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelingLosses {
  double rg = 0.0;
  double ar = 0.0;
};

struct GuidanceLosses {
  double gg = 0.0;
  double ag = 0.0;  // 0 when lambda_AG = 0 (never evaluated)
};

// One draw of everything a training example needs besides the graph noise.
struct TrainingDraw {
  std::size_t index = 0;
  int t = 1;
  Eigen::VectorXd eps;
};

class Trainer {
 public:
  Trainer(const RunConfig& cfg, const GraphDataset& train)
      : cfg_(cfg), data_(&train), model_(model_config(cfg), train.stats(), cfg.seed), rng_(derive_seed(cfg.seed, 10)) {
    if (train.empty()) throw TrainingError("empty dataset");
    make_optimizers();
  }

  // Continues from a checkpoint. The run config may differ only in fields
  // outside the training hash (step counts, logging, sampler, eval).
  Trainer(const Checkpoint& ck, const RunConfig& cfg, const GraphDataset& train)
      : cfg_(cfg), data_(&train), model_(ck.model), rng_(engine_from_state(ck.rng_state)) {
    if (training_hash(cfg) != training_hash(ck.config)) throw TrainingError("config hash mismatch on resume");
    if (train.empty()) throw TrainingError("empty dataset");
    if (train.node_types() != model_.stats().node_types || train.edge_types() != model_.stats().edge_types) {
      throw TrainingError("dataset vocabulary differs from the checkpoint's");
    }
    make_optimizers();
    restore_optimizer("encoder", enc_opt_, ck);
    restore_optimizer("rdm", rdm_opt_, ck);
    restore_optimizer("denoiser", den_opt_, ck);
    modeling_step_ = ck.modeling_step;
    guidance_step_ = ck.guidance_step;
  }

  GraphRcgModel& model() { return model_; }
  const GraphRcgModel& model() const { return model_; }
  const RunConfig& config() const { return cfg_; }
  long long modeling_steps_done() const { return modeling_step_; }
  long long guidance_steps_done() const { return guidance_step_; }
  Engine& rng() { return rng_; }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.config = cfg_;
    ck.model = model_;
    ck.modeling_step = modeling_step_;
    ck.guidance_step = guidance_step_;
    ck.rng_state = engine_state(rng_);
    ck.optimizers["encoder"] = capture(enc_opt_);
    ck.optimizers["rdm"] = capture(rdm_opt_);
    ck.optimizers["denoiser"] = capture(den_opt_);
    return ck;
  }

  // Losses of fixed draws at the current parameters; no update, no RNG use
  // beyond `rng`.
  ModelingLosses evaluate_modeling(const std::vector<TrainingDraw>& draws, Engine& rng) const {
    ad::GradMode off(false);
    ModelingLosses l;
    const double inv = 1.0 / static_cast<double>(draws.size());
    for (const auto& d : draws) {
      const GraphSample& g = (*data_)[d.index];
      const Eigen::VectorXd h0 = model_.encoder().encode(g);
      const Eigen::VectorXd ht = noise_representation_with(h0, d.t, model_.schedule(), d.eps);
      l.rg += (h0 - model_.rdm().denoise(ht, d.t)).squaredNorm() * inv;
      const GraphSample gt = noise_graph(g, d.t, model_.noise(), rng);
      l.ar += (ht - model_.encoder().encode(gt)).squaredNorm() * inv;
    }
    return l;
  }

  double evaluate_guidance(const std::vector<TrainingDraw>& draws, Engine& rng) const {
    ad::GradMode off(false);
    double loss = 0.0;
    for (const auto& d : draws) {
      const GraphSample& g = (*data_)[d.index];
      const GraphSample gt = noise_graph(g, d.t, model_.noise(), rng);
      const Eigen::VectorXd h0 = model_.encoder().encode(g);
      const Eigen::VectorXd rep =
          model_.rdm().denoise(noise_representation_with(h0, d.t, model_.schedule(), d.eps), d.t);
      loss += loss_gg(g, model_.denoiser().predict_clean(gt, rep, d.t)) / static_cast<double>(draws.size());
    }
    return loss;
  }

  std::vector<TrainingDraw> draw_batch(Engine& rng) const {
    std::vector<TrainingDraw> batch(static_cast<std::size_t>(cfg_.training.batch_size));
    for (auto& d : batch) {
      d.index = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(data_->size()) - 1));
      d.t = uniform_int(rng, 1, model_.steps());
      d.eps = standard_normal_vector(rng, model_.rep_dim());
    }
    return batch;
  }

  ModelingLosses modeling_step() {
    const std::vector<TrainingDraw> batch = draw_batch(rng_);
    return modeling_step(batch, rng_);
  }

  // One update on given draws; graph noise comes from `noise_rng`.
  ModelingLosses modeling_step(const std::vector<TrainingDraw>& batch, Engine& noise_rng) {
    set_phase_trainable(true, true, false);
    const auto B = static_cast<ad::Index>(batch.size());
    ad::Matrix h0(B, model_.rep_dim()), eps(B, model_.rep_dim());
    std::vector<int> t(batch.size());
    {
      ad::GradMode off(false);
      for (ad::Index r = 0; r < B; ++r) {
        const TrainingDraw& d = batch[static_cast<std::size_t>(r)];
        h0.row(r) = model_.encoder().encode((*data_)[d.index]).transpose();
        eps.row(r) = d.eps.transpose();
        t[static_cast<std::size_t>(r)] = d.t;
      }
    }
    ModelingLosses l;
    // Representation denoiser on L_RG.
    const ad::Var rg = loss_rg(model_.rdm(), model_.schedule(), h0, t, eps);
    l.rg = rg.item();
    check_finite(l.rg, "loss_rg", "modeling");
    rg.backward();
    rdm_opt_.step();
    // Encoder on L_AR against the same noised representations.
    ad::Var ar;
    for (ad::Index r = 0; r < B; ++r) {
      const TrainingDraw& d = batch[static_cast<std::size_t>(r)];
      const Eigen::VectorXd ht = noise_representation_with(h0.row(r).transpose(), d.t, model_.schedule(), d.eps);
      const GraphSample gt = noise_graph((*data_)[d.index], d.t, model_.noise(), noise_rng);
      const ad::Var term = ad::scale(alignment_loss_ar(model_.encoder(), ht, gt), 1.0 / static_cast<double>(B));
      ar = ar.defined() ? ad::add(ar, term) : term;
    }
    l.ar = ar.item();
    check_finite(l.ar, "loss_ar", "modeling");
    ar.backward();
    enc_opt_.step();
    ++modeling_step_;
    return l;
  }

  GuidanceLosses guidance_step() {
    if (!model_.trained("modeling")) throw TrainingError("guidance phase needs a modeling checkpoint");
    const std::vector<TrainingDraw> batch = draw_batch(rng_);
    return guidance_step(batch, rng_);
  }

  GuidanceLosses guidance_step(const std::vector<TrainingDraw>& batch, Engine& noise_rng) {
    if (!model_.trained("modeling")) throw TrainingError("guidance phase needs a modeling checkpoint");
    set_phase_trainable(false, false, true);
    const double inv = 1.0 / static_cast<double>(batch.size());
    const double lambda = cfg_.training.lambda_ag;
    GuidanceLosses l;
    ad::Var total;
    for (const auto& d : batch) {
      const GraphSample& g = (*data_)[d.index];
      const GraphSample gt = noise_graph(g, d.t, model_.noise(), noise_rng);
      Eigen::VectorXd rep;
      {
        ad::GradMode off(false);
        const Eigen::VectorXd h0 = model_.encoder().encode(g);
        rep = model_.rdm().denoise(noise_representation_with(h0, d.t, model_.schedule(), d.eps), d.t);
      }
      const DenoiserOutput out = model_.denoiser().forward(gt, rep, d.t);
      ad::Var term = loss_gg(g, out);
      l.gg += term.item() * inv;
      if (lambda != 0.0) {
        const ad::Var ag = loss_ag(model_.encoder(), out, rep);
        l.ag += ag.item() * inv;
        term = ad::add(term, ad::scale(ag, lambda));
      }
      term = ad::scale(term, inv);
      total = total.defined() ? ad::add(total, term) : term;
    }
    check_finite(l.gg + l.ag, "loss_gg+loss_ag", "guidance");
    total.backward();
    den_opt_.step();
    ++guidance_step_;
    return l;
  }

  // Runs Alg. 1 iterations up to training.modeling_steps. `log` receives JSON
  // lines; `checkpoint_path` (optional) receives periodic and final saves.
  void run_modeling_phase(std::ostream* log = nullptr, const std::string& checkpoint_path = "") {
    checkpoint_path_ = checkpoint_path;
    const auto start = std::chrono::steady_clock::now();
    while (modeling_step_ < cfg_.training.modeling_steps) {
      const ModelingLosses l = modeling_step();
      if (log && (modeling_step_ % cfg_.training.log_every == 0 || modeling_step_ == cfg_.training.modeling_steps)) {
        write_log(*log, {{"phase", "modeling"}, {"step", modeling_step_}, {"loss_rg", l.rg}, {"loss_ar", l.ar}},
                  start);
      }
      periodic_checkpoint(modeling_step_);
    }
    check_rdm_finite();
    model_.phases().insert("modeling");
    if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, checkpoint());
  }

  void run_guidance_phase(std::ostream* log = nullptr, const std::string& checkpoint_path = "") {
    if (!model_.trained("modeling")) throw TrainingError("guidance phase needs a modeling checkpoint");
    checkpoint_path_ = checkpoint_path;
    const std::uint64_t enc_hash = model_.encoder().parameters().hash();
    const std::uint64_t rdm_hash = model_.rdm().parameters().hash();
    const auto start = std::chrono::steady_clock::now();
    while (guidance_step_ < cfg_.training.guidance_steps) {
      const GuidanceLosses l = guidance_step();
      if (log && (guidance_step_ % cfg_.training.log_every == 0 || guidance_step_ == cfg_.training.guidance_steps)) {
        write_log(*log, {{"phase", "guidance"}, {"step", guidance_step_}, {"loss_gg", l.gg}, {"loss_ag", l.ag}},
                  start);
      }
      if (log && cfg_.training.validation_every > 0 && guidance_step_ % cfg_.training.validation_every == 0) {
        write_log(*log, {{"phase", "validation"}, {"step", guidance_step_}, {"degree_mmd", validation_mmd()}}, start);
      }
      periodic_checkpoint(guidance_step_);
    }
    if (model_.encoder().parameters().hash() != enc_hash || model_.rdm().parameters().hash() != rdm_hash) {
      throw std::logic_error("frozen parameters changed during the guidance phase");
    }
    model_.phases().insert("guidance");
    if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, checkpoint());
  }

  // Degree MMD between quick stepwise samples and the training graphs.
  double validation_mmd() const {
    SamplerConfig sc;
    sc.seed = derive_seed(cfg_.seed, 20, static_cast<std::uint64_t>(guidance_step_));
    sc.allow_untrained = true;
    return degree_mmd(sample_graphs(model_, sc, cfg_.training.validation_samples), data_->samples());
  }

 private:
  void make_optimizers() {
    const TrainConfig& t = cfg_.training;
    enc_opt_ = nn::AdamW(model_.encoder().parameters(), {t.encoder_lr, 0.9, 0.999, 1e-8, t.weight_decay});
    rdm_opt_ = nn::AdamW(model_.rdm().parameters(), {t.rdm_lr, 0.9, 0.999, 1e-8, t.weight_decay});
    den_opt_ = nn::AdamW(model_.denoiser().parameters(), {t.denoiser_lr, 0.9, 0.999, 1e-8, t.weight_decay});
  }

  static void restore_optimizer(const std::string& name, nn::AdamW& opt, const Checkpoint& ck) {
    auto it = ck.optimizers.find(name);
    if (it != ck.optimizers.end()) restore(opt, it->second);
  }

  void set_phase_trainable(bool encoder, bool rdm, bool denoiser) {
    model_.encoder().parameters().set_trainable(encoder);
    model_.rdm().parameters().set_trainable(rdm);
    model_.denoiser().parameters().set_trainable(denoiser);
  }

  void check_finite(double loss, const char* what, const char* phase) {
    if (std::isfinite(loss)) return;
    std::string where;
    if (!checkpoint_path_.empty()) {
      where = checkpoint_path_ + ".nan";
      save_checkpoint(where, checkpoint());
    }
    throw TrainingError(std::string("non-finite ") + what + " in " + phase + " phase at step " +
                        std::to_string(std::string(phase) == "modeling" ? modeling_step_ : guidance_step_) +
                        (where.empty() ? "" : "; diagnostic checkpoint " + where));
  }

  void check_rdm_finite() const {
    ad::GradMode off(false);
    const Eigen::VectorXd probe = Eigen::VectorXd::Ones(model_.rep_dim());
    for (int t : {1, (model_.steps() + 1) / 2, model_.steps()}) {
      if (!model_.rdm().denoise(probe, t).allFinite()) throw TrainingError("representation denoiser output not finite");
    }
  }

  void periodic_checkpoint(long long step) {
    const int every = cfg_.training.checkpoint_every;
    if (every > 0 && !checkpoint_path_.empty() && step % every == 0) save_checkpoint(checkpoint_path_, checkpoint());
  }

  static void write_log(std::ostream& os, nlohmann::json rec, std::chrono::steady_clock::time_point start) {
    rec["wall_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    os << rec.dump() << '\n';
    os.flush();
  }

  RunConfig cfg_;
  const GraphDataset* data_;
  GraphRcgModel model_;
  Engine rng_;
  nn::AdamW enc_opt_, rdm_opt_, den_opt_;
  long long modeling_step_ = 0;
  long long guidance_step_ = 0;
  std::string checkpoint_path_;
};

}  // namespace graphrcg

#pragma once
// The three networks plus the noise model and corpus statistics they were
// built for. Everything sampling needs travels together in a checkpoint.

#include <cstdint>
#include <set>
#include <string>

#include "graphrcg/config.hpp"
#include "graphrcg/denoiser.hpp"
#include "graphrcg/encoder.hpp"
#include "graphrcg/graph.hpp"
#include "graphrcg/noise.hpp"
#include "graphrcg/rdm.hpp"

namespace graphrcg {

struct ModelConfig {
  ScheduleConfig schedule;
  EncoderConfig encoder;
  RdmConfig rdm;
  DenoiserConfig denoiser;
};

inline ModelConfig model_config(const RunConfig& c) { return {c.schedule, c.encoder, c.rdm, c.denoiser}; }

class GraphRcgModel {
 public:
  GraphRcgModel() = default;
  GraphRcgModel(const ModelConfig& cfg, const DatasetStats& stats, std::uint64_t seed) : cfg_(cfg), stats_(stats) {
    cfg_.rdm.d_h = cfg_.encoder.d_h;
    noise_ = GraphNoiseModel(NoiseSchedule(cfg.schedule.steps, cfg.schedule.offset), stats.marginals,
                             cfg.schedule.kernel);
    Engine r1(derive_seed(seed, 1)), r2(derive_seed(seed, 2)), r3(derive_seed(seed, 3));
    encoder_ = GraphEncoder(cfg_.encoder, stats.node_types, stats.edge_types, r1);
    rdm_ = RepresentationDenoiser(cfg_.rdm, cfg.schedule.steps, r2);
    denoiser_ = GraphDenoiser(cfg_.denoiser, stats.node_types, stats.edge_types, cfg_.encoder.d_h,
                              cfg.schedule.steps, r3);
  }

  const ModelConfig& config() const { return cfg_; }
  const DatasetStats& stats() const { return stats_; }
  const GraphNoiseModel& noise() const { return noise_; }
  const NoiseSchedule& schedule() const { return noise_.schedule; }
  int steps() const { return noise_.steps(); }
  int rep_dim() const { return cfg_.encoder.d_h; }

  GraphEncoder& encoder() { return encoder_; }
  const GraphEncoder& encoder() const { return encoder_; }
  RepresentationDenoiser& rdm() { return rdm_; }
  const RepresentationDenoiser& rdm() const { return rdm_; }
  GraphDenoiser& denoiser() { return denoiser_; }
  const GraphDenoiser& denoiser() const { return denoiser_; }

  // Phases completed so far ("modeling", "guidance").
  std::set<std::string>& phases() { return phases_; }
  const std::set<std::string>& phases() const { return phases_; }
  bool trained(const std::string& phase) const { return phases_.count(phase) > 0; }

  // All parameter stores in a fixed order.
  std::vector<const nn::ParameterStore*> stores() const {
    return {&encoder_.parameters(), &rdm_.parameters(), &denoiser_.parameters()};
  }

 private:
  ModelConfig cfg_;
  DatasetStats stats_;
  GraphNoiseModel noise_;
  GraphEncoder encoder_;
  RepresentationDenoiser rdm_;
  GraphDenoiser denoiser_;
  std::set<std::string> phases_;
};

}  // namespace graphrcg

#pragma once
// Run configuration: one JSON file per run. Every section is optional and
// falls back to defaults; unknown keys are rejected with the offending path.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphrcg/datasets.hpp"
#include "graphrcg/denoiser.hpp"
#include "graphrcg/encoder.hpp"
#include "graphrcg/metrics.hpp"
#include "graphrcg/noise.hpp"
#include "graphrcg/rdm.hpp"

namespace graphrcg {

struct DatasetConfig {
  std::string kind = "sbm";  // sbm | planar | file
  std::string path;          // kind == file, or where generate-data writes
  SbmConfig sbm;
  PlanarConfig planar;
  double train_fraction = 1.0;  // the rest is held out for evaluation
};

struct ScheduleConfig {
  int steps = 1000;
  double offset = 0.008;
  KernelKind kernel = KernelKind::Marginal;
};

struct TrainConfig {
  int modeling_steps = 1000;
  int guidance_steps = 1000;
  int batch_size = 8;
  double rdm_lr = 1e-4;
  double encoder_lr = 1e-4;
  double denoiser_lr = 2e-4;
  double weight_decay = 0.01;
  double lambda_ag = 1.0;
  int log_every = 10;
  int checkpoint_every = 0;  // 0: only at phase end
  int validation_every = 0;  // 0: off
  int validation_samples = 32;

  void validate() const {
    if (modeling_steps < 0) throw ConfigError("training.modeling_steps", "must be >= 0");
    if (guidance_steps < 0) throw ConfigError("training.guidance_steps", "must be >= 0");
    if (batch_size < 1) throw ConfigError("training.batch_size", "must be >= 1");
    if (!(rdm_lr > 0.0)) throw ConfigError("training.rdm_lr", "must be > 0");
    if (!(encoder_lr > 0.0)) throw ConfigError("training.encoder_lr", "must be > 0");
    if (!(denoiser_lr > 0.0)) throw ConfigError("training.denoiser_lr", "must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("training.weight_decay", "must be >= 0");
    if (!(lambda_ag >= 0.0)) throw ConfigError("training.lambda_ag", "must be >= 0");
    if (log_every < 1) throw ConfigError("training.log_every", "must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("training.checkpoint_every", "must be >= 0");
    if (validation_every < 0) throw ConfigError("training.validation_every", "must be >= 0");
    if (validation_samples < 1) throw ConfigError("training.validation_samples", "must be >= 1");
  }
};

enum class GuidanceMode { Stepwise, StepwiseEncode, FixedRep, Gradient, Unconditional };
enum class ReverseMode { Posterior, DirectClean };

inline GuidanceMode guidance_mode_from_string(const std::string& s) {
  if (s == "stepwise") return GuidanceMode::Stepwise;
  if (s == "stepwise_encode") return GuidanceMode::StepwiseEncode;
  if (s == "fixed_rep") return GuidanceMode::FixedRep;
  if (s == "gradient") return GuidanceMode::Gradient;
  if (s == "unconditional") return GuidanceMode::Unconditional;
  throw std::invalid_argument("unknown guidance mode '" + s + "'");
}

inline std::string to_string(GuidanceMode m) {
  switch (m) {
    case GuidanceMode::Stepwise: return "stepwise";
    case GuidanceMode::StepwiseEncode: return "stepwise_encode";
    case GuidanceMode::FixedRep: return "fixed_rep";
    case GuidanceMode::Gradient: return "gradient";
    case GuidanceMode::Unconditional: return "unconditional";
  }
  return "?";
}

inline ReverseMode reverse_mode_from_string(const std::string& s) {
  if (s == "posterior") return ReverseMode::Posterior;
  if (s == "direct_clean") return ReverseMode::DirectClean;
  throw std::invalid_argument("unknown reverse mode '" + s + "'");
}

inline std::string to_string(ReverseMode m) { return m == ReverseMode::Posterior ? "posterior" : "direct_clean"; }

struct SamplerConfig {
  GuidanceMode mode = GuidanceMode::Stepwise;
  ReverseMode reverse = ReverseMode::Posterior;
  double lambda = 0.0;
  int ddim_stride = 1;
  std::uint64_t seed = 0;
  int count = 64;
  bool allow_untrained = false;

  void validate(int total_steps) const {
    if (!(lambda >= 0.0)) throw ConfigError("sampler.lambda", "must be >= 0");
    if (ddim_stride < 1 || total_steps % ddim_stride != 0) {
      throw ConfigError("sampler.ddim_stride", "must divide schedule.T");
    }
    if (count < 1) throw ConfigError("sampler.count", "must be >= 1");
  }
};

struct EvalConfig {
  MetricOptions metrics;
  std::string valency_table;  // optional path
};

struct RunConfig {
  DatasetConfig dataset;
  ScheduleConfig schedule;
  EncoderConfig encoder;
  RdmConfig rdm;
  DenoiserConfig denoiser;
  TrainConfig training;
  SamplerConfig sampler;
  EvalConfig eval;
  std::uint64_t seed = 0;
  std::string run_dir;  // empty: derived from hash and time

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

namespace detail {

// Reads typed fields from one JSON object and rejects anything it was not asked for.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(field(key), "wrong type");
    }
  }

  template <typename Fn>
  void sub(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Section s(j_.at(key), field(key));
    fn(s);
    s.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void get_enum(Section& s, const std::string& key, Enum& out, Parse parse) {
  std::string text;
  s.get(key, text);
  if (text.empty()) return;
  try {
    out = parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.field(key), e.what());
  }
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::Section root(j, "");
  root.sub("dataset", [&](detail::Section& s) {
    s.get("kind", c.dataset.kind);
    s.get("path", c.dataset.path);
    s.get("train_fraction", c.dataset.train_fraction);
    s.sub("sbm", [&](detail::Section& t) {
      t.get("num_graphs", c.dataset.sbm.num_graphs);
      t.get("min_communities", c.dataset.sbm.min_communities);
      t.get("max_communities", c.dataset.sbm.max_communities);
      t.get("min_community_size", c.dataset.sbm.min_community_size);
      t.get("max_community_size", c.dataset.sbm.max_community_size);
      t.get("intra_prob", c.dataset.sbm.intra_prob);
      t.get("inter_prob", c.dataset.sbm.inter_prob);
      t.get("seed", c.dataset.sbm.seed);
    });
    s.sub("planar", [&](detail::Section& t) {
      t.get("num_graphs", c.dataset.planar.num_graphs);
      t.get("num_nodes", c.dataset.planar.num_nodes);
      t.get("seed", c.dataset.planar.seed);
    });
  });
  root.sub("schedule", [&](detail::Section& s) {
    s.get("T", c.schedule.steps);
    s.get("s", c.schedule.offset);
    detail::get_enum(s, "kernel", c.schedule.kernel, kernel_kind_from_string);
  });
  root.sub("encoder", [&](detail::Section& s) {
    s.get("d_h", c.encoder.d_h);
    s.get("layers", c.encoder.layers);
    s.get("hidden", c.encoder.hidden);
    detail::get_enum(s, "pooling", c.encoder.pooling, pooling_from_string);
  });
  root.sub("rdm", [&](detail::Section& s) {
    s.get("blocks", c.rdm.blocks);
    s.get("hidden", c.rdm.hidden);
    s.get("time_dim", c.rdm.time_dim);
  });
  root.sub("denoiser", [&](detail::Section& s) {
    s.get("layers", c.denoiser.layers);
    s.get("hidden", c.denoiser.hidden);
    s.get("edge_hidden", c.denoiser.edge_hidden);
    s.get("heads", c.denoiser.heads);
    s.get("attn_dim", c.denoiser.attn_dim);
    s.get("time_dim", c.denoiser.time_dim);
  });
  root.sub("training", [&](detail::Section& s) {
    TrainConfig& t = c.training;
    s.get("modeling_steps", t.modeling_steps);
    s.get("guidance_steps", t.guidance_steps);
    s.get("batch_size", t.batch_size);
    s.get("rdm_lr", t.rdm_lr);
    s.get("encoder_lr", t.encoder_lr);
    s.get("denoiser_lr", t.denoiser_lr);
    s.get("weight_decay", t.weight_decay);
    s.get("lambda_ag", t.lambda_ag);
    s.get("log_every", t.log_every);
    s.get("checkpoint_every", t.checkpoint_every);
    s.get("validation_every", t.validation_every);
    s.get("validation_samples", t.validation_samples);
  });
  root.sub("sampler", [&](detail::Section& s) {
    detail::get_enum(s, "mode", c.sampler.mode, guidance_mode_from_string);
    detail::get_enum(s, "reverse", c.sampler.reverse, reverse_mode_from_string);
    s.get("lambda", c.sampler.lambda);
    s.get("ddim_stride", c.sampler.ddim_stride);
    s.get("seed", c.sampler.seed);
    s.get("count", c.sampler.count);
  });
  root.sub("eval", [&](detail::Section& s) {
    MetricOptions& m = c.eval.metrics;
    s.get("sigma", m.sigma);
    s.get("orbit_sigma", m.orbit_sigma);
    s.get("clustering_bins", m.clustering_bins);
    s.get("spectral_bins", m.spectral_bins);
    s.get("orbits", m.orbits);
    s.get("spectral", m.spectral);
    s.get("valency_table", c.eval.valency_table);
  });
  root.get("seed", c.seed);
  root.get("run_dir", c.run_dir);
  root.finish();
  c.rdm.d_h = c.encoder.d_h;
  c.validate();
  return c;
}

inline void RunConfig::validate() const {
  auto in_dataset = [](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError("dataset." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
    }
  };
  if (dataset.kind == "sbm") {
    in_dataset([&] { dataset.sbm.validate(); });
  } else if (dataset.kind == "planar") {
    in_dataset([&] { dataset.planar.validate(); });
  } else if (dataset.kind == "file") {
    if (dataset.path.empty()) throw ConfigError("dataset.path", "required when dataset.kind is file");
  } else {
    throw ConfigError("dataset.kind", "must be sbm, planar or file");
  }
  if (!(dataset.train_fraction > 0.0 && dataset.train_fraction <= 1.0)) {
    throw ConfigError("dataset.train_fraction", "must lie in (0, 1]");
  }
  if (schedule.steps < 1) throw ConfigError("schedule.T", "must be >= 1");
  if (!(schedule.offset > 0.0)) throw ConfigError("schedule.s", "must be > 0");
  auto wrap = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(section, e.what());
    }
  };
  wrap("encoder", [&] { encoder.validate(); });
  wrap("rdm", [&] { rdm.validate(); });
  wrap("denoiser", [&] { denoiser.validate(); });
  training.validate();
  sampler.validate(schedule.steps);
  if (!(eval.metrics.sigma > 0.0)) throw ConfigError("eval.sigma", "must be > 0");
  if (!(eval.metrics.orbit_sigma > 0.0)) throw ConfigError("eval.orbit_sigma", "must be > 0");
  if (eval.metrics.clustering_bins < 1) throw ConfigError("eval.clustering_bins", "must be >= 1");
  if (eval.metrics.spectral_bins < 1) throw ConfigError("eval.spectral_bins", "must be >= 1");
}

inline nlohmann::json RunConfig::to_json() const {
  using nlohmann::json;
  const SbmConfig& b = dataset.sbm;
  return json{
      {"dataset",
       {{"kind", dataset.kind},
        {"path", dataset.path},
        {"train_fraction", dataset.train_fraction},
        {"sbm",
         {{"num_graphs", b.num_graphs},
          {"min_communities", b.min_communities},
          {"max_communities", b.max_communities},
          {"min_community_size", b.min_community_size},
          {"max_community_size", b.max_community_size},
          {"intra_prob", b.intra_prob},
          {"inter_prob", b.inter_prob},
          {"seed", b.seed}}},
        {"planar",
         {{"num_graphs", dataset.planar.num_graphs},
          {"num_nodes", dataset.planar.num_nodes},
          {"seed", dataset.planar.seed}}}}},
      {"schedule", {{"T", schedule.steps}, {"s", schedule.offset}, {"kernel", to_string(schedule.kernel)}}},
      {"encoder",
       {{"d_h", encoder.d_h},
        {"layers", encoder.layers},
        {"hidden", encoder.hidden},
        {"pooling", to_string(encoder.pooling)}}},
      {"rdm", {{"blocks", rdm.blocks}, {"hidden", rdm.hidden}, {"time_dim", rdm.time_dim}}},
      {"denoiser",
       {{"layers", denoiser.layers},
        {"hidden", denoiser.hidden},
        {"edge_hidden", denoiser.edge_hidden},
        {"heads", denoiser.heads},
        {"attn_dim", denoiser.attn_dim},
        {"time_dim", denoiser.time_dim}}},
      {"training",
       {{"modeling_steps", training.modeling_steps},
        {"guidance_steps", training.guidance_steps},
        {"batch_size", training.batch_size},
        {"rdm_lr", training.rdm_lr},
        {"encoder_lr", training.encoder_lr},
        {"denoiser_lr", training.denoiser_lr},
        {"weight_decay", training.weight_decay},
        {"lambda_ag", training.lambda_ag},
        {"log_every", training.log_every},
        {"checkpoint_every", training.checkpoint_every},
        {"validation_every", training.validation_every},
        {"validation_samples", training.validation_samples}}},
      {"sampler",
       {{"mode", to_string(sampler.mode)},
        {"reverse", to_string(sampler.reverse)},
        {"lambda", sampler.lambda},
        {"ddim_stride", sampler.ddim_stride},
        {"seed", sampler.seed},
        {"count", sampler.count}}},
      {"eval",
       {{"sigma", eval.metrics.sigma},
        {"orbit_sigma", eval.metrics.orbit_sigma},
        {"clustering_bins", eval.metrics.clustering_bins},
        {"spectral_bins", eval.metrics.spectral_bins},
        {"orbits", eval.metrics.orbits},
        {"spectral", eval.metrics.spectral},
        {"valency_table", eval.valency_table}}},
      {"seed", seed},
      {"run_dir", run_dir}};
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return RunConfig::from_json(j);
}

// Hash of everything that determines training: data, schedule, models,
// optimizer settings and the global seed. Step counts, logging cadence,
// sampler, eval and run_dir are excluded so a run can be extended or sampled
// differently without invalidating its checkpoints.
inline std::uint64_t training_hash(const RunConfig& c) {
  nlohmann::json j = c.to_json();
  j.erase("sampler");
  j.erase("eval");
  j.erase("run_dir");
  j["training"].erase("modeling_steps");
  j["training"].erase("guidance_steps");
  j["training"].erase("log_every");
  j["training"].erase("checkpoint_every");
  j["training"].erase("validation_every");
  j["training"].erase("validation_samples");
  return detail::fnv1a(j.dump());
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace graphrcg

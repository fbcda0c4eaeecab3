// graphrcg: dataset generation, training, sampling, evaluation and
// representation dumps. Exit codes: 0 success, 1 usage or config error,
// 2 runtime failure. Errors are printed to stderr as one JSON line.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "graphrcg/checkpoint.hpp"
#include "graphrcg/graph_io.hpp"
#include "graphrcg/metrics.hpp"
#include "graphrcg/run.hpp"
#include "graphrcg/sampler.hpp"
#include "graphrcg/training.hpp"

namespace fs = std::filesystem;
using namespace graphrcg;
using nlohmann::json;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

int fail(const std::string& kind, const std::string& message, const std::string& field = "") {
  json j{{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << std::endl;
  return kind == "runtime" ? 2 : 1;
}

void report(const json& j) { std::cout << j.dump() << std::endl; }

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  return with_overrides(load_run_config(path), overrides);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

std::string checkpoint_dir(const std::string& ckpt) {
  const fs::path p = fs::path(ckpt).parent_path();
  return p.empty() ? "." : p.string();
}

// ---- generate-data ----

struct GenerateArgs {
  std::string config, out;
  std::vector<std::string> set;
};

int cmd_generate(const GenerateArgs& a) {
  const RunConfig cfg = load_config(a.config, a.set);
  if (cfg.dataset.kind == "file") throw ConfigError("dataset.kind", "generate-data needs sbm or planar");
  std::string out = a.out;
  if (out.empty()) out = cfg.dataset.path;
  if (out.empty()) {
    const std::string dir = resolve_run_dir(cfg);
    fs::create_directories(dir);
    out = (fs::path(dir) / "dataset.jsonl").string();
  }
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  const GraphDataset ds = build_dataset(cfg.dataset);
  save_dataset(out, ds);
  report({{"dataset", out}, {"graphs", ds.size()}});
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string config, checkpoint, run_dir, phase = "both";
  std::vector<std::string> set;
};

int cmd_train(const TrainArgs& a) {
  std::optional<Checkpoint> ck;
  if (!a.checkpoint.empty()) ck = load_checkpoint(a.checkpoint);
  if (a.phase == "guidance" && !ck) throw UsageError("--phase guidance needs a modeling checkpoint (--checkpoint)");
  RunConfig cfg;
  if (!a.config.empty()) {
    cfg = load_config(a.config, a.set);
  } else if (ck) {
    cfg = with_overrides(ck->config, a.set);
  } else {
    throw UsageError("train needs --config or --checkpoint");
  }
  if (!a.run_dir.empty()) cfg.run_dir = a.run_dir;
  const std::string dir = ck && a.run_dir.empty() && cfg.run_dir.empty() ? checkpoint_dir(a.checkpoint)
                                                                         : resolve_run_dir(cfg);
  fs::create_directories(dir);

  const DatasetSplit data = split_dataset(build_dataset(cfg.dataset), cfg.dataset.train_fraction);
  {
    auto os = open_out((fs::path(dir) / "config.json").string());
    os << cfg.to_json().dump(2) << '\n';
  }
  if (!data.held_out.empty()) save_dataset((fs::path(dir) / "held_out.jsonl").string(), data.held_out);

  Trainer tr = ck ? Trainer(*ck, cfg, data.train) : Trainer(cfg, data.train);
  const std::string ckpt = (fs::path(dir) / "model.ckpt").string();
  auto log = open_out((fs::path(dir) / "train.jsonl").string(), std::ios::app);
  if (a.phase == "modeling" || a.phase == "both") tr.run_modeling_phase(&log, ckpt);
  if (a.phase == "guidance" || a.phase == "both") tr.run_guidance_phase(&log, ckpt);
  report({{"run_dir", dir},
          {"checkpoint", ckpt},
          {"config_hash", hash_hex(training_hash(cfg))},
          {"modeling_steps", tr.modeling_steps_done()},
          {"guidance_steps", tr.guidance_steps_done()}});
  return 0;
}

// ---- sample ----

struct SampleArgs {
  std::string checkpoint, out, mode, reverse, rep_from, trace;
  std::optional<int> count, stride;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::size_t rep_index = 0;
  std::vector<std::size_t> interpolate;
  std::optional<double> alpha;
  std::vector<std::string> set;
};

int cmd_sample(const SampleArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const GraphRcgModel& m = ck.model;
  SamplerConfig sc = with_overrides(ck.config, a.set).sampler;
  if (!a.mode.empty()) sc.mode = guidance_mode_from_string(a.mode);
  if (!a.reverse.empty()) sc.reverse = reverse_mode_from_string(a.reverse);
  if (a.count) sc.count = *a.count;
  if (a.seed) sc.seed = *a.seed;
  if (a.lambda) sc.lambda = *a.lambda;
  if (a.stride) sc.ddim_stride = *a.stride;
  sc.validate(m.steps());
  if (!a.interpolate.empty() && !a.alpha) throw UsageError("--interpolate needs --alpha");
  if (a.alpha && a.interpolate.empty()) throw UsageError("--alpha needs --interpolate A B");
  if (!a.rep_from.empty() && sc.mode != GuidanceMode::FixedRep) throw UsageError("--rep-from needs --mode fixed_rep");

  std::optional<Eigen::VectorXd> fixed;
  if (!a.rep_from.empty()) {
    const GraphDataset src = load_dataset(a.rep_from);
    if (a.rep_index >= src.size()) throw UsageError("--rep-index out of range for " + a.rep_from);
    fixed = m.encoder().encode(src[a.rep_index]);
  }
  std::optional<RepresentationTrajectory> ta, tb;
  if (!a.interpolate.empty()) {
    SamplerConfig rep = sc;
    ta = sample_representation_trajectory(m, rep, a.interpolate[0]);
    tb = sample_representation_trajectory(m, rep, a.interpolate[1]);
  }

  std::vector<GraphSample> graphs;
  std::optional<std::ofstream> trace;
  if (!a.trace.empty()) trace = open_out(a.trace);
  for (int i = 0; i < sc.count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const SampleResult r = ta ? interpolate_sample(m, *ta, *tb, *a.alpha, sc, idx)
                              : sample_graph(m, sc, idx, fixed ? &*fixed : nullptr);
    if (trace) {
      for (const StepTrace& s : r.trace) {
        *trace << json{{"sample", i}, {"t", s.t}, {"node_entropy", s.node_entropy}, {"edge_entropy", s.edge_entropy}}
                      .dump()
               << '\n';
      }
    }
    graphs.push_back(r.graph);
  }
  std::string out = a.out;
  if (out.empty()) {
    out = (fs::path(checkpoint_dir(a.checkpoint)) /
           ("samples-" + to_string(sc.mode) + "-" + std::to_string(sc.seed) + ".jsonl"))
              .string();
  }
  write_graphs_file(out, graphs, m.stats().node_types, m.stats().edge_types);
  report({{"samples", out}, {"count", graphs.size()}, {"mode", to_string(sc.mode)}, {"seed", sc.seed}});
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string reference, samples, valency_table, config, out;
  std::optional<double> sigma;
  bool no_orbits = false, no_spectral = false, as_json = false;
};

int cmd_eval(const EvalArgs& a) {
  EvalConfig ec;
  if (!a.config.empty()) ec = load_run_config(a.config).eval;
  if (a.sigma) ec.metrics.sigma = *a.sigma;
  if (a.no_orbits) ec.metrics.orbits = false;
  if (a.no_spectral) ec.metrics.spectral = false;
  if (!a.valency_table.empty()) ec.valency_table = a.valency_table;
  std::optional<ValencyTable> table;
  if (!ec.valency_table.empty()) {
    std::ifstream in(ec.valency_table);
    if (!in) throw std::runtime_error("cannot open " + ec.valency_table);
    table = ValencyTable::from_json(json::parse(in));
  }
  const GraphDataset ref = load_dataset(a.reference);
  const GraphDataset smp = load_dataset(a.samples);
  const MetricReport r = evaluate(ref.samples(), smp.samples(), ec.metrics, table ? &*table : nullptr);
  if (!a.out.empty()) {
    auto os = open_out(a.out);
    os << r.to_json().dump(2) << '\n';
  }
  if (a.as_json) {
    report(r.to_json());
  } else {
    std::cout << r.to_text();
  }
  return 0;
}

// ---- dump-trajectory / encode ----

struct DumpArgs {
  std::string checkpoint, out;
  int count = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> stride;
  bool guides = false;
};

int cmd_dump_trajectory(const DumpArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  SamplerConfig sc = ck.config.sampler;
  if (a.seed) sc.seed = *a.seed;
  if (a.stride) sc.ddim_stride = *a.stride;
  sc.validate(ck.model.steps());
  if (a.count < 1) throw UsageError("--count must be >= 1");
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& os = a.out.empty() ? std::cout : file;
  for (int i = 0; i < a.count; ++i) {
    os << "# sample " << i << '\n';
    sample_representation_trajectory(ck.model, sc, static_cast<std::size_t>(i)).dump(os, a.guides);
  }
  return 0;
}

struct EncodeArgs {
  std::string checkpoint, graphs, out;
};

int cmd_encode(const EncodeArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const GraphDataset ds = load_dataset(a.graphs);
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& os = a.out.empty() ? std::cout : file;
  os.precision(17);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const Eigen::VectorXd h = ck.model.encoder().encode(ds[k]);
    os << k;
    for (Eigen::Index j = 0; j < h.size(); ++j) os << ' ' << h(j);
    os << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-conditioned graph generation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Write a synthetic dataset file from a config");
  g->add_option("--config", gen.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output file (default: dataset.path or <run dir>/dataset.jsonl)");
  g->add_option("--set", gen.set, "Override a config key, key=value");

  TrainArgs tra;
  auto* t = app.add_subcommand("train", "Run the modeling and/or guidance phase");
  t->add_option("--config", tra.config, "Run config (JSON)")->check(CLI::ExistingFile);
  t->add_option("--phase", tra.phase, "modeling | guidance | both")
      ->check(CLI::IsMember({"modeling", "guidance", "both"}));
  t->add_option("--checkpoint", tra.checkpoint, "Checkpoint to resume or continue from")->check(CLI::ExistingFile);
  t->add_option("--run-dir", tra.run_dir, "Artifact directory (default: $GRAPHRCG_RUN_DIR/<hash>-<time>)");
  t->add_option("--set", tra.set, "Override a config key, key=value");

  SampleArgs sa;
  auto* s = app.add_subcommand("sample", "Generate graphs from a trained checkpoint");
  s->add_option("--checkpoint", sa.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  s->add_option("--count", sa.count, "Number of graphs");
  s->add_option("--mode", sa.mode, "stepwise | stepwise_encode | fixed_rep | gradient | unconditional");
  s->add_option("--reverse", sa.reverse, "posterior | direct_clean");
  s->add_option("--seed", sa.seed, "Sampling seed");
  s->add_option("--lambda", sa.lambda, "Gradient-guidance weight");
  s->add_option("--stride", sa.stride, "DDIM stride of the representation chain");
  s->add_option("--rep-from", sa.rep_from, "Graph file whose encoding guides fixed_rep mode")
      ->check(CLI::ExistingFile);
  s->add_option("--rep-index", sa.rep_index, "Record of --rep-from to encode");
  s->add_option("--interpolate", sa.interpolate, "Interpolate the trajectories of sample streams A and B")
      ->expected(2);
  s->add_option("--alpha", sa.alpha, "Interpolation ratio in [0, 1]");
  s->add_option("--trace", sa.trace, "Write per-step entropies (JSON lines)");
  s->add_option("--out", sa.out, "Output graph file");
  s->add_option("--set", sa.set, "Override a sampler config key, key=value");

  EvalArgs ea;
  auto* e = app.add_subcommand("eval", "Structure MMDs (and validity) of samples against a reference");
  e->add_option("reference", ea.reference, "Reference graph file")->required()->check(CLI::ExistingFile);
  e->add_option("samples", ea.samples, "Sampled graph file")->required()->check(CLI::ExistingFile);
  e->add_option("--valency-table", ea.valency_table, "JSON valency table; enables validity and uniqueness")
      ->check(CLI::ExistingFile);
  e->add_option("--config", ea.config, "Take metric options from a run config")->check(CLI::ExistingFile);
  e->add_option("--sigma", ea.sigma, "Gaussian-TV bandwidth");
  e->add_flag("--no-orbits", ea.no_orbits, "Skip orbit MMD");
  e->add_flag("--no-spectral", ea.no_spectral, "Skip spectral MMD");
  e->add_flag("--json", ea.as_json, "Print the report as JSON");
  e->add_option("--out", ea.out, "Also write the JSON report here");

  DumpArgs da;
  auto* d = app.add_subcommand("dump-trajectory", "Print sampled representation chains, one vector per line");
  d->add_option("--checkpoint", da.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  d->add_option("--count", da.count, "Number of chains");
  d->add_option("--seed", da.seed, "Sampling seed");
  d->add_option("--stride", da.stride, "DDIM stride");
  d->add_flag("--guides", da.guides, "Print the clean estimates instead of the noisy states");
  d->add_option("--out", da.out, "Output file (default: stdout)");

  EncodeArgs en;
  auto* c = app.add_subcommand("encode", "Print the encoder's representation of every graph in a file");
  c->add_option("--checkpoint", en.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  c->add_option("--graphs", en.graphs, "Graph file")->required()->check(CLI::ExistingFile);
  c->add_option("--out", en.out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& pe) {
    return fail("usage", pe.what());
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tra);
    if (*s) return cmd_sample(sa);
    if (*e) return cmd_eval(ea);
    if (*d) return cmd_dump_trajectory(da);
    if (*c) return cmd_encode(en);
  } catch (const ConfigError& ce) {
    return fail("config", ce.what(), ce.field());
  } catch (const UsageError& ue) {
    return fail("usage", ue.what());
  } catch (const std::invalid_argument& ia) {
    return fail("usage", ia.what());
  } catch (const std::exception& ex) {
    return fail("runtime", ex.what());
  }
  return fail("usage", "no command");
}

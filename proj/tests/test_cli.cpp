#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "graphrcg/checkpoint.hpp"
#include "graphrcg/graph_io.hpp"
#include "graphrcg/metrics.hpp"
#include "graphrcg/run.hpp"
#include "graphrcg/sampler.hpp"

namespace fs = std::filesystem;
using namespace graphrcg;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(const std::string& args, const std::string& env = "") {
  const fs::path err = fs::temp_directory_path() / "graphrcg_cli_stderr.txt";
  const std::string cmd = env + " " + GRAPHRCG_CLI_PATH + " " + args + " 2>" + err.string();
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  r.err.assign(std::istreambuf_iterator<char>(in), {});
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<json> losses(const fs::path& log) {
  std::vector<json> out;
  std::istringstream in(slurp(log));
  std::string line;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    j.erase("wall_ms");
    out.push_back(j);
  }
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("graphrcg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const json cfg = {
        {"dataset",
         {{"kind", "sbm"},
          {"train_fraction", 0.75},
          {"sbm",
           {{"num_graphs", 16},
            {"min_communities", 2},
            {"max_communities", 2},
            {"min_community_size", 3},
            {"max_community_size", 4},
            {"intra_prob", 0.8},
            {"inter_prob", 0.1},
            {"seed", 3}}}}},
        {"schedule", {{"T", 20}}},
        {"encoder", {{"d_h", 8}, {"layers", 2}, {"hidden", 12}}},
        {"rdm", {{"blocks", 2}, {"hidden", 16}, {"time_dim", 8}}},
        {"denoiser",
         {{"layers", 2}, {"hidden", 8}, {"edge_hidden", 6}, {"heads", 2}, {"attn_dim", 4}, {"time_dim", 8}}},
        {"training",
         {{"modeling_steps", 15},
          {"guidance_steps", 15},
          {"batch_size", 4},
          {"rdm_lr", 1e-3},
          {"encoder_lr", 1e-3},
          {"denoiser_lr", 1e-3},
          {"log_every", 1}}},
        {"sampler", {{"count", 4}, {"seed", 2}}},
        {"seed", 7}};
    std::ofstream(config()) << cfg.dump(2);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config() const { return (dir_ / "config.json").string(); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Trains into <dir>/<name> and returns the checkpoint path.
  std::string train(const std::string& name) {
    const Result r = run("train --config " + config() + " --phase both --run-dir " + path(name));
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name + "/model.ckpt");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateDataRoundTripsAndIsDeterministic) {
  const Result a = run("generate-data --config " + config() + " --out " + path("a.jsonl"));
  const Result b = run("generate-data --config " + config() + " --out " + path("b.jsonl"));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(json::parse(a.out).at("graphs"), 16);
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  const GraphDataset loaded = load_dataset(path("a.jsonl"));
  EXPECT_EQ(loaded.samples(), build_dataset(load_run_config(config()).dataset).samples());
}

TEST_F(Cli, InvalidProbabilityNamesTheField) {
  const Result r = run("generate-data --config " + config() + " --set dataset.sbm.intra_prob=1.5");
  EXPECT_EQ(r.code, 1);
  const json e = json::parse(r.err);
  EXPECT_EQ(e.at("error"), "config");
  EXPECT_EQ(e.at("field"), "dataset.sbm.intra_prob");
}

TEST_F(Cli, ErrorsAreOneJsonLineWithExitCode) {
  Result r = run("train --config " + config() + " --set training.bogus=1");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err).at("field"), "training.bogus");
  r = run("sample --checkpoint " + config());
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err).at("error"), "runtime");
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  r = run("no-such-command");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err).at("error"), "usage");
}

TEST_F(Cli, TrainBothWritesLoadableCheckpoint) {
  const std::string ck = train("run");
  const Checkpoint c = load_checkpoint(ck);
  EXPECT_TRUE(c.model.trained("modeling"));
  EXPECT_TRUE(c.model.trained("guidance"));
  EXPECT_EQ(c.modeling_step, 15);
  EXPECT_EQ(c.guidance_step, 15);
  EXPECT_TRUE(fs::exists(path("run/held_out.jsonl")));
  EXPECT_EQ(load_dataset(path("run/held_out.jsonl")).size(), 4u);
  EXPECT_EQ(losses(path("run/train.jsonl")).size(), 30u);
}

TEST_F(Cli, GuidanceWithoutModelingCheckpointFails) {
  Result r = run("train --config " + config() + " --phase guidance --run-dir " + path("g"));
  EXPECT_NE(r.code, 0);
  // A checkpoint that has not been through the modeling phase.
  ASSERT_EQ(run("train --config " + config() + " --phase modeling --set training.modeling_steps=0 --run-dir " +
                path("m0"))
                .code,
            0);
  Checkpoint c = load_checkpoint(path("m0/model.ckpt"));
  c.model.phases().clear();
  save_checkpoint(path("bare.ckpt"), c);
  r = run("train --phase guidance --checkpoint " + path("bare.ckpt") + " --run-dir " + path("g2"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(json::parse(r.err).at("message").get<std::string>().find("modeling"), std::string::npos);
}

TEST_F(Cli, SameSeedsGiveIdenticalLossLogs) {
  train("a");
  train("b");
  EXPECT_EQ(losses(path("a/train.jsonl")), losses(path("b/train.jsonl")));
}

TEST_F(Cli, PhasesRunSeparatelyMatchBoth) {
  train("both");
  ASSERT_EQ(run("train --config " + config() + " --phase modeling --run-dir " + path("split")).code, 0);
  const Result r = run("train --phase guidance --checkpoint " + path("split/model.ckpt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(losses(path("split/train.jsonl")), losses(path("both/train.jsonl")));
  EXPECT_EQ(load_checkpoint(path("split/model.ckpt")).model.denoiser().parameters().hash(),
            load_checkpoint(path("both/model.ckpt")).model.denoiser().parameters().hash());
}

TEST_F(Cli, RunDirectoryDefaultsToEnvironmentRoot) {
  const Result r = run("train --config " + config() + " --phase modeling", "GRAPHRCG_RUN_DIR=" + path("root"));
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path dir = json::parse(r.out).at("run_dir").get<std::string>();
  EXPECT_EQ(dir.parent_path(), fs::path(path("root")));
  const std::string hash = hash_hex(training_hash(load_run_config(config())));
  EXPECT_EQ(dir.filename().string().substr(0, hash.size()), hash);
  EXPECT_TRUE(fs::exists(dir / "model.ckpt"));
}

TEST_F(Cli, SampleWritesValidRecordsMatchingLibrary) {
  const std::string ck = train("run");
  const Result r = run("sample --checkpoint " + ck + " --count 16 --seed 5 --out " + path("s.jsonl") +
                       " --trace " + path("trace.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const GraphFile f = read_graphs_file(path("s.jsonl"));
  ASSERT_EQ(f.graphs.size(), 16u);
  const Checkpoint c = load_checkpoint(ck);
  SamplerConfig sc = c.config.sampler;
  sc.seed = 5;
  EXPECT_EQ(f.graphs, sample_graphs(c.model, sc, 16));
  std::istringstream trace(slurp(path("trace.jsonl")));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) {
    const json j = json::parse(line);
    EXPECT_TRUE(std::isfinite(j.at("node_entropy").get<double>()));
    ++lines;
  }
  EXPECT_EQ(lines, 16 * 20);
}

TEST_F(Cli, FixedRepAndInterpolationWiring) {
  const std::string ck = train("run");
  const Checkpoint c = load_checkpoint(ck);
  const GraphDataset held = load_dataset(path("run/held_out.jsonl"));
  SamplerConfig sc = c.config.sampler;

  Result r = run("sample --checkpoint " + ck + " --mode fixed_rep --rep-from " + path("run/held_out.jsonl") +
                 " --rep-index 1 --count 3 --out " + path("fr.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Eigen::VectorXd h0 = c.model.encoder().encode(held[1]);
  const auto fr = read_graphs_file(path("fr.jsonl")).graphs;
  ASSERT_EQ(fr.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(fr[i], fixed_rep_sample(c.model, h0, sc, i).graph);

  r = run("sample --checkpoint " + ck + " --interpolate 0 1 --alpha 0.5 --count 3 --out " + path("ip.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = sample_representation_trajectory(c.model, sc, 0);
  const auto b = sample_representation_trajectory(c.model, sc, 1);
  const auto ip = read_graphs_file(path("ip.jsonl")).graphs;
  ASSERT_EQ(ip.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ip[i], interpolate_sample(c.model, a, b, 0.5, sc, i).graph);

  EXPECT_EQ(run("sample --checkpoint " + ck + " --interpolate 0 1").code, 1);
  EXPECT_EQ(run("sample --checkpoint " + ck + " --rep-from " + path("run/held_out.jsonl")).code, 1);
}

TEST_F(Cli, UntrainedCheckpointCannotSample) {
  ASSERT_EQ(run("train --config " + config() + " --phase modeling --run-dir " + path("m")).code, 0);
  const Result r = run("sample --checkpoint " + path("m/model.ckpt"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("untrained"), std::string::npos);
}

TEST_F(Cli, EvalMatchesLibraryAndIsZeroOnIdenticalFiles) {
  ASSERT_EQ(run("generate-data --config " + config() + " --out " + path("ref.jsonl")).code, 0);
  ASSERT_EQ(run("generate-data --config " + config() + " --set dataset.sbm.seed=9 --out " + path("smp.jsonl")).code,
            0);
  Result r = run("eval " + path("ref.jsonl") + " " + path("ref.jsonl") + " --json");
  ASSERT_EQ(r.code, 0) << r.err;
  json same = json::parse(r.out);
  for (const char* k : {"degree_mmd", "cluster_mmd", "orbit_mmd", "spectral_mmd"}) {
    EXPECT_NEAR(same.at(k).get<double>(), 0.0, 1e-12) << k;
  }
  r = run("eval " + path("ref.jsonl") + " " + path("smp.jsonl") + " --json --out " + path("report.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(r.out);
  EXPECT_EQ(json::parse(slurp(path("report.json"))), rep);
  const auto ref = load_dataset(path("ref.jsonl")).samples();
  const auto smp = load_dataset(path("smp.jsonl")).samples();
  EXPECT_DOUBLE_EQ(rep.at("degree_mmd").get<double>(), degree_mmd(ref, smp));
  EXPECT_DOUBLE_EQ(rep.at("cluster_mmd").get<double>(), clustering_mmd(ref, smp));
  EXPECT_DOUBLE_EQ(rep.at("orbit_mmd").get<double>(), orbit_mmd(ref, smp));
  EXPECT_DOUBLE_EQ(rep.at("spectral_mmd").get<double>(), spectral_mmd(ref, smp));
  for (const auto& [k, v] : rep.items()) EXPECT_TRUE(std::isfinite(v.get<double>())) << k;
  EXPECT_GT(rep.at("degree_mmd").get<double>(), 0.0);
}

TEST_F(Cli, EvalWithValencyTableReportsValidity) {
  std::ofstream(path("mols.jsonl")) << R"({"format":"graphrcg-graphs","version":1,"node_types":2,"edge_types":3}
{"n":3,"nodes":[0,0,1],"edges":[[0,1,1],[1,2,2]]}
{"n":3,"nodes":[1,1,1],"edges":[[0,1,2],[1,2,2]]}
{"n":2,"nodes":[0,1],"edges":[]}
)";
  std::ofstream(path("valency.json")) << R"({"max_valency":{"0":4,"1":2},"bond_order":{"1":1,"2":2}})";
  const Result r = run("eval " + path("mols.jsonl") + " " + path("mols.jsonl") + " --json --valency-table " +
                       path("valency.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(r.out);
  // Middle node of the second graph carries bond order 4 > 2; the third is disconnected.
  EXPECT_NEAR(rep.at("validity").get<double>(), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(rep.at("uniqueness").get<double>(), 1.0);
}

TEST_F(Cli, DumpsTrajectoriesAndEncodings) {
  const std::string ck = train("run");
  Result r = run("dump-trajectory --checkpoint " + ck + " --count 2 --stride 5");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  int vectors = 0;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    std::istringstream fields(line);
    int t;
    fields >> t;
    double v;
    int dims = 0;
    while (fields >> v) ++dims;
    EXPECT_EQ(dims, 8);
    EXPECT_EQ(t % 5, 0);
    ++vectors;
  }
  EXPECT_EQ(vectors, 2 * 5);
  r = run("encode --checkpoint " + ck + " --graphs " + path("run/held_out.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
}

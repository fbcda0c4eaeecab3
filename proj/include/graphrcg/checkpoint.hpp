#pragma once
// Binary checkpoint container.
//
//   "GRCGCKPT"  8 bytes
//   version     uint32 little endian
//   header_len  uint64
//   header      JSON: config, config hash, dataset statistics, phases,
//               counters, RNG state, optimizer step counts, blob table
//   blobs       raw float64 row-major matrices in blob-table order
//
// Doubles in the header are written in shortest round-trip form, so a
// load/save cycle is byte-identical.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphrcg/config.hpp"
#include "graphrcg/model.hpp"
#include "graphrcg/optim.hpp"

namespace graphrcg {

inline constexpr char kCheckpointMagic[8] = {'G', 'R', 'C', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerState {
  long long steps = 0;
  std::vector<ad::Matrix> first;
  std::vector<ad::Matrix> second;
};

inline OptimizerState capture(const nn::AdamW& opt) { return {opt.steps(), opt.first_moments(), opt.second_moments()}; }

inline void restore(nn::AdamW& opt, const OptimizerState& s) {
  if (s.first.size() != opt.first_moments().size()) throw CheckpointError("optimizer state does not match model");
  for (std::size_t i = 0; i < s.first.size(); ++i) {
    if (s.first[i].rows() != opt.first_moments()[i].rows() || s.first[i].cols() != opt.first_moments()[i].cols()) {
      throw CheckpointError("optimizer moment shape mismatch");
    }
  }
  opt.set_steps(s.steps);
  opt.first_moments() = s.first;
  opt.second_moments() = s.second;
}

struct Checkpoint {
  RunConfig config;
  GraphRcgModel model;
  long long modeling_step = 0;
  long long guidance_step = 0;
  std::string rng_state;
  std::map<std::string, OptimizerState> optimizers;  // "encoder", "rdm", "denoiser"
};

namespace detail {

inline nlohmann::json stats_to_json(const DatasetStats& s) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [n, p] : s.size_histogram) hist.push_back({n, p});
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"node_types", s.node_types},
          {"edge_types", s.edge_types},
          {"node_marginal", vec(s.marginals.node)},
          {"edge_marginal", vec(s.marginals.edge)},
          {"size_histogram", hist}};
}

inline DatasetStats stats_from_json(const nlohmann::json& j) {
  DatasetStats s;
  s.node_types = j.at("node_types").get<int>();
  s.edge_types = j.at("edge_types").get<int>();
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  s.marginals.node = vec(j.at("node_marginal"));
  s.marginals.edge = vec(j.at("edge_marginal"));
  for (const auto& e : j.at("size_histogram")) s.size_histogram[e.at(0).get<int>()] = e.at(1).get<double>();
  return s;
}

struct Blob {
  std::string name;
  const ad::Matrix* data;
};

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_le(std::istream& is, int bytes) {
  unsigned char b[8] = {};
  is.read(reinterpret_cast<char*>(b), bytes);
  if (!is) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  using nlohmann::json;
  std::vector<detail::Blob> blobs;
  for (const nn::ParameterStore* store : ck.model.stores()) {
    for (const auto& p : store->params()) blobs.push_back({p.name, &p.var.value()});
  }
  json opt_meta = json::object();
  for (const auto& [name, st] : ck.optimizers) {
    opt_meta[name] = {{"steps", st.steps}, {"tensors", st.first.size()}};
    for (std::size_t i = 0; i < st.first.size(); ++i) {
      blobs.push_back({"adam." + name + ".m." + std::to_string(i), &st.first[i]});
      blobs.push_back({"adam." + name + ".v." + std::to_string(i), &st.second[i]});
    }
  }
  json table = json::array();
  for (const auto& b : blobs) table.push_back({b.name, b.data->rows(), b.data->cols()});
  const json header{{"format", "graphrcg-checkpoint"},
                    {"config", ck.config.to_json()},
                    {"config_hash", hash_hex(training_hash(ck.config))},
                    {"stats", detail::stats_to_json(ck.model.stats())},
                    {"phases", std::vector<std::string>(ck.model.phases().begin(), ck.model.phases().end())},
                    {"modeling_step", ck.modeling_step},
                    {"guidance_step", ck.guidance_step},
                    {"rng", ck.rng_state},
                    {"optimizers", opt_meta},
                    {"blobs", table}};
  const std::string text = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write " + tmp);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_u32(os, kCheckpointVersion);
    detail::write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& b : blobs) {
      os.write(reinterpret_cast<const char*>(b.data->data()),
               static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(b.data->size())));
    }
    if (!os) throw CheckpointError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot rename " + tmp);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw CheckpointError("not a checkpoint: " + path);
  const auto version = static_cast<std::uint32_t>(detail::read_le(is, 4));
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = detail::read_le(is, 8);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw CheckpointError("truncated checkpoint header");

  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ck.config = RunConfig::from_json(header.at("config"));
    if (header.at("config_hash").get<std::string>() != hash_hex(training_hash(ck.config))) {
      throw CheckpointError("checkpoint config hash mismatch");
    }
    ck.model = GraphRcgModel(model_config(ck.config), detail::stats_from_json(header.at("stats")), ck.config.seed);
    for (const auto& p : header.at("phases")) ck.model.phases().insert(p.get<std::string>());
    ck.modeling_step = header.at("modeling_step").get<long long>();
    ck.guidance_step = header.at("guidance_step").get<long long>();
    ck.rng_state = header.at("rng").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }

  std::map<std::string, ad::Matrix> loaded;
  for (const auto& entry : header.at("blobs")) {
    const auto name = entry.at(0).get<std::string>();
    ad::Matrix m(entry.at(1).get<ad::Index>(), entry.at(2).get<ad::Index>());
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!is) throw CheckpointError("truncated checkpoint blob " + name);
    loaded.emplace(name, std::move(m));
  }
  for (const nn::ParameterStore* store : ck.model.stores()) {
    for (const auto& p : store->params()) {
      auto it = loaded.find(p.name);
      if (it == loaded.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
      if (it->second.rows() != p.var.rows() || it->second.cols() != p.var.cols()) {
        throw CheckpointError("shape mismatch for parameter " + p.name);
      }
      ad::Var v = p.var;
      v.mutable_value() = it->second;
    }
  }
  for (const auto& [name, meta] : header.at("optimizers").items()) {
    OptimizerState st;
    st.steps = meta.at("steps").get<long long>();
    const auto count = meta.at("tensors").get<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) {
      st.first.push_back(loaded.at("adam." + name + ".m." + std::to_string(i)));
      st.second.push_back(loaded.at("adam." + name + ".v." + std::to_string(i)));
    }
    ck.optimizers.emplace(name, std::move(st));
  }
  return ck;
}

}  // namespace graphrcg

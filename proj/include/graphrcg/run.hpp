#pragma once
// Plumbing shared by the command line and the acceptance runner: datasets
// from config, train/held-out split, run directories and key overrides.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphrcg/config.hpp"
#include "graphrcg/datasets.hpp"
#include "graphrcg/graph_io.hpp"

namespace graphrcg {

inline constexpr const char* kRunDirEnv = "GRAPHRCG_RUN_DIR";

inline GraphDataset build_dataset(const DatasetConfig& d) {
  if (d.kind == "sbm") return generate_sbm(d.sbm);
  if (d.kind == "planar") return generate_planar(d.planar);
  if (d.kind == "file") return load_dataset(d.path);
  throw ConfigError("dataset.kind", "must be sbm, planar or file");
}

struct DatasetSplit {
  GraphDataset train;
  GraphDataset held_out;  // empty when train_fraction is 1
};

// The first round(fraction * N) graphs train (at least one); the rest are held
// out. Generated datasets are i.i.d., so no shuffle is needed.
inline DatasetSplit split_dataset(const GraphDataset& all, double fraction) {
  const auto n = all.size();
  auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  k = std::max<std::size_t>(1, std::min(k, n));
  const auto& s = all.samples();
  DatasetSplit out{GraphDataset(std::vector<GraphSample>(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k))), {}};
  if (k < n) out.held_out = GraphDataset(std::vector<GraphSample>(s.begin() + static_cast<std::ptrdiff_t>(k), s.end()));
  return out;
}

inline std::string default_run_root() {
  const char* env = std::getenv(kRunDirEnv);
  return env && *env ? env : "runs";
}

// cfg.run_dir when set, otherwise <root>/<training hash>-<UTC timestamp>.
inline std::string resolve_run_dir(const RunConfig& cfg) {
  if (!cfg.run_dir.empty()) return cfg.run_dir;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << hash_hex(training_hash(cfg)) << '-' << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return (std::filesystem::path(default_run_root()) / os.str()).string();
}

// Sets a dotted key ("training.batch_size") in a config document. The value
// is read as JSON when it parses, otherwise as a string.
inline void set_config_key(nlohmann::json& doc, const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("<override>", "empty key");
  nlohmann::json v = nlohmann::json::parse(value, nullptr, false);
  if (v.is_discarded()) v = value;
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "malformed key");
    if (!node->is_object()) throw ConfigError(key, "not an object path");
    if (dot == std::string::npos) {
      (*node)[part] = v;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

// Applies "key=value" overrides and revalidates (unknown keys are rejected).
inline RunConfig with_overrides(const RunConfig& cfg, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return cfg;
  nlohmann::json doc = cfg.to_json();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must be key=value");
    set_config_key(doc, o.substr(0, eq), o.substr(eq + 1));
  }
  return RunConfig::from_json(doc);
}

}  // namespace graphrcg

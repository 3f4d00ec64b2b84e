#include "clp/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace clp {

namespace {

struct KeyDoc {
  const char* key;
  const char* default_value;
  const char* help;
};

constexpr KeyDoc kKeys[] = {
    {"d", "32", "embedding dimension"},
    {"heads", "4", "attention heads per typed subgraph"},
    {"tau", "0.1", "InfoNCE temperature"},
    {"lambda1", "1e-3", "node-level contrastive weight"},
    {"lambda2", "1e-3", "edge-level contrastive weight"},
    {"lambda3", "1e-3", "time-level contrastive weight"},
    {"lr", "1e-4", "Adam learning rate"},
    {"batch_size", "1024", "supervision triples per optimizer step"},
    {"patience", "5", "epochs without validation-AP gain before stopping"},
    {"max_epochs", "300", "upper bound on training epochs"},
    {"seed", "0", "seed for splits, initialisation and sampling"},
    {"window", "(unset)", "ingest: snapshot window length in time units"},
    {"snapshots", "(unset)", "ingest: number of snapshots (used when window is unset)"},
    {"neg_ratio", "1", "negatives per positive in each split"},
    {"share_params_across_time", "false", "one node-level W/A per edge type and one edge-level W"},
    {"supervision_source", "next_snapshot_train_split", "next_snapshot_train_split | last_snapshot"},
    {"time_loss_sign", "standard", "standard | literal"},
    {"literal_eq13", "false", "score negative pairs with -log sigma(+dot)"},
    {"contrastive_composition", "subtractive", "subtractive (L+ - L-) | additive (L+ + L-)"},
    {"ablation", "none", "none | no_node | no_edge | no_time"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": '" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

// Splits "key = value" lines, skipping blanks and comments.
std::vector<std::pair<std::string, std::string>> key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void TrainConfig::validate() const {
  hp.validate();
  if (neg_ratio < 1) throw ConfigError("neg_ratio must be >= 1");
  if (window && snapshots) throw ConfigError("set either window or snapshots, not both");
  if (window && *window <= 0) throw ConfigError("window must be > 0");
  if (snapshots && *snapshots < 2) throw ConfigError("snapshots must be >= 2");
}

void TrainConfig::set(const std::string& key, const std::string& v) {
  if (key == "d") hp.dim = static_cast<int>(to_int(key, v));
  else if (key == "heads") hp.heads = static_cast<int>(to_int(key, v));
  else if (key == "tau") hp.tau = to_double(key, v);
  else if (key == "lambda1") hp.lambda1 = to_double(key, v);
  else if (key == "lambda2") hp.lambda2 = to_double(key, v);
  else if (key == "lambda3") hp.lambda3 = to_double(key, v);
  else if (key == "lr") hp.lr = to_double(key, v);
  else if (key == "batch_size") hp.batch_size = static_cast<int>(to_int(key, v));
  else if (key == "patience") hp.patience = static_cast<int>(to_int(key, v));
  else if (key == "max_epochs") hp.max_epochs = static_cast<int>(to_int(key, v));
  else if (key == "seed") hp.seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "window") window = to_int(key, v);
  else if (key == "snapshots") snapshots = to_int(key, v);
  else if (key == "neg_ratio") neg_ratio = static_cast<int>(to_int(key, v));
  else if (key == "share_params_across_time") share_params_across_time = to_bool(key, v);
  else if (key == "supervision_source") supervision_source = parse_supervision_source(v);
  else if (key == "time_loss_sign") time_loss_sign = parse_time_loss_sign(v);
  else if (key == "literal_eq13") literal_eq13 = to_bool(key, v);
  else if (key == "contrastive_composition") composition = parse_composition(v);
  else if (key == "ablation") hp.ablation = parse_ablation(v);
  else throw ConfigError("unknown config key '" + key + "'");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["d"] = hp.dim;
  j["heads"] = hp.heads;
  j["tau"] = hp.tau;
  // Echo the effective weights so ablations are visible.
  j["lambda1"] = hp.node_weight();
  j["lambda2"] = hp.edge_weight();
  j["lambda3"] = hp.time_weight();
  j["lr"] = hp.lr;
  j["batch_size"] = hp.batch_size;
  j["patience"] = hp.patience;
  j["max_epochs"] = hp.max_epochs;
  j["seed"] = hp.seed;
  j["neg_ratio"] = neg_ratio;
  j["share_params_across_time"] = share_params_across_time;
  j["supervision_source"] = to_string(supervision_source);
  j["time_loss_sign"] = to_string(time_loss_sign);
  j["literal_eq13"] = literal_eq13;
  j["contrastive_composition"] = to_string(composition);
  j["ablation"] = to_string(hp.ablation);
  if (window) j["window"] = *window;
  if (snapshots) j["snapshots"] = *snapshots;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) {
    cfg.set(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  return cfg;
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  for (const auto& [key, value] : key_values(text)) cfg.set(key, value);
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::vector<TrainConfig> expand_grid(const TrainConfig& base, const std::string& text) {
  std::vector<TrainConfig> cells{base};
  for (const auto& [key, list] : key_values(text)) {
    std::vector<std::string> values;
    std::stringstream ss(list);
    std::string v;
    while (std::getline(ss, v, ',')) {
      if (!trim(v).empty()) values.push_back(trim(v));
    }
    if (values.empty()) throw ConfigError("grid key '" + key + "' has no values");
    std::vector<TrainConfig> next;
    for (const auto& cell : cells) {
      for (const auto& value : values) {
        TrainConfig c = cell;
        if (key == "lambda") {
          for (const char* k : {"lambda1", "lambda2", "lambda3"}) c.set(k, value);
        } else {
          c.set(key, value);
        }
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  for (const auto& c : cells) c.validate();
  return cells;
}

const std::string& default_grid() {
  static const std::string text =
      "lambda = 1e-3, 1e-4, 1e-6, 1e-8, 1e-9, 1e-10\n"
      "tau = 0.04, 0.06, 0.08, 0.1, 0.12\n";
  return text;
}

std::string config_help() {
  std::ostringstream out;
  out << "Config keys (flat `key = value` file):\n";
  for (const auto& k : kKeys) {
    out << "  " << k.key << " = " << k.default_value << "    # " << k.help << '\n';
  }
  return out.str();
}

}  // namespace clp

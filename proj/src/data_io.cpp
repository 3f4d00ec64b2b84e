#include <fstream>
#include <sstream>

#include "clp/data.hpp"
#include "json.hpp"

namespace clp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kIngestVersion = 1;

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_ingested(const fs::path& dir, const TemporalHeterogeneousNetwork& thn) {
  fs::create_directories(dir);
  json meta;
  meta["format_version"] = kIngestVersion;
  meta["t_min"] = thn.t_min;
  meta["window"] = thn.window;
  meta["edge_types"] = thn.edge_types;
  json nodes = json::array();
  for (const auto& info : thn.registry.nodes()) nodes.push_back({{"id", info.id}, {"type", info.type}});
  meta["nodes"] = std::move(nodes);
  json snaps = json::array();
  for (const auto& g : thn.snapshots) {
    const std::string file = "snapshot_" + std::to_string(g.index) + ".csv";
    const bool is_eval = &g == &thn.snapshots.back();
    snaps.push_back({{"index", g.index},
                     {"start", g.start},
                     {"end", g.end},
                     {"edges", g.edges.size()},
                     {"file", file},
                     {"role", is_eval ? "evaluation" : "train"}});
    auto out = open_out(dir / file);
    out << "src,dst,src_type,dst_type,edge_type\n";
    for (const auto& e : g.edges) {
      const auto& a = thn.registry.info(e.src);
      const auto& b = thn.registry.info(e.dst);
      out << a.id << ',' << b.id << ',' << a.type << ',' << b.type << ','
          << thn.edge_types[static_cast<std::size_t>(e.type)] << '\n';
    }
  }
  meta["snapshots"] = std::move(snaps);
  auto out = open_out(dir / "snapshots.json");
  out << meta.dump(2) << '\n';
}

TemporalHeterogeneousNetwork read_ingested(const fs::path& dir) {
  const json meta = read_json(dir / "snapshots.json");
  try {
    if (meta.at("format_version").get<int>() != kIngestVersion) {
      throw UnsupportedVersionError("snapshots.json format_version " +
                                    meta.at("format_version").dump());
    }
    TemporalHeterogeneousNetwork thn;
    thn.t_min = meta.at("t_min").get<std::int64_t>();
    thn.window = meta.at("window").get<std::int64_t>();
    thn.edge_types = meta.at("edge_types").get<std::vector<std::string>>();
    std::unordered_map<std::string, std::int32_t> type_index;
    for (std::size_t r = 0; r < thn.edge_types.size(); ++r) {
      type_index[thn.edge_types[r]] = static_cast<std::int32_t>(r);
    }
    for (const auto& node : meta.at("nodes")) {
      thn.registry.intern(node.at("id").get<std::string>(), node.at("type").get<std::string>());
    }
    for (const auto& s : meta.at("snapshots")) {
      SnapshotGraph g;
      g.index = s.at("index").get<int>();
      g.start = s.at("start").get<std::int64_t>();
      g.end = s.at("end").get<std::int64_t>();
      const fs::path file = dir / s.at("file").get<std::string>();
      auto in = open_in(file);
      std::string line;
      std::getline(in, line);
      std::size_t line_no = 1;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != 5) {
          throw ParseError(file.string() + " line " + std::to_string(line_no) +
                           ": expected 5 fields");
        }
        const NodeIndex a = thn.registry.at(cells[0]);
        const NodeIndex b = thn.registry.at(cells[1]);
        auto it = type_index.find(cells[4]);
        if (it == type_index.end()) {
          throw ConfigError(file.string() + " line " + std::to_string(line_no) +
                            ": unknown edge type '" + cells[4] + "'");
        }
        const auto [lo, hi] = normalized(a, b);
        g.edges.push_back({lo, hi, it->second});
      }
      std::sort(g.edges.begin(), g.edges.end());
      g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
      for (const auto& e : g.edges) {
        g.nodes.push_back(e.src);
        g.nodes.push_back(e.dst);
      }
      std::sort(g.nodes.begin(), g.nodes.end());
      g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
      thn.snapshots.push_back(std::move(g));
    }
    if (thn.snapshots.size() < 2) {
      throw InsufficientSpanError(dir.string() + ": fewer than 2 snapshots");
    }
    return thn;
  } catch (const json::exception& e) {
    throw ParseError((dir / "snapshots.json").string() + ": " + e.what());
  }
}

void write_split(const fs::path& file, const EvalSplit& split, const NodeRegistry& registry) {
  auto encode = [&](const std::vector<NodePair>& pairs) {
    json arr = json::array();
    for (const auto& [a, b] : pairs) arr.push_back({registry.info(a).id, registry.info(b).id});
    return arr;
  };
  json j;
  j["seed"] = split.seed;
  j["neg_ratio"] = split.neg_ratio;
  j["train_pos"] = encode(split.train_pos);
  j["val_pos"] = encode(split.val_pos);
  j["test_pos"] = encode(split.test_pos);
  j["train_neg"] = encode(split.train_neg);
  j["val_neg"] = encode(split.val_neg);
  j["test_neg"] = encode(split.test_neg);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  auto out = open_out(file);
  out << j.dump() << '\n';
}

EvalSplit read_split(const fs::path& file, const NodeRegistry& registry) {
  const json j = read_json(file);
  try {
    auto decode = [&](const char* key) {
      std::vector<NodePair> pairs;
      for (const auto& p : j.at(key)) {
        pairs.push_back(normalized(registry.at(p.at(0).get<std::string>()),
                                   registry.at(p.at(1).get<std::string>())));
      }
      return pairs;
    };
    EvalSplit split;
    split.seed = j.at("seed").get<std::uint64_t>();
    split.neg_ratio = j.value("neg_ratio", 1);
    split.train_pos = decode("train_pos");
    split.val_pos = decode("val_pos");
    split.test_pos = decode("test_pos");
    split.train_neg = decode("train_neg");
    split.val_neg = decode("val_neg");
    split.test_neg = decode("test_neg");
    return split;
  } catch (const json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

}  // namespace clp

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"

using namespace clp;
using clp::testing::parse;
using clp::testing::snapshot;

namespace {

const char* kHeader = "src,dst,src_type,dst_type,edge_type,timestamp\n";

std::string rows(std::initializer_list<const char*> lines) {
  std::string s = kHeader;
  for (const char* l : lines) (s += l) += '\n';
  return s;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("clp_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse_edges: empty body, dedup, fixture counts") {
  CHECK(parse(kHeader).empty());
  CHECK(parse(rows({"a,b,u,u,x,3", "a,b,u,u,x,3"})).size() == 1);
  // Reversed endpoints are the same undirected edge.
  CHECK(parse(rows({"a,b,u,i,x,3", "b,a,i,u,x,3"})).size() == 1);

  const auto edges = parse(rows({"u1,i1,user,item,buy,0", "u1,i2,user,item,click,1",
                                 "u2,i1,user,item,buy,2", "u2,i3,user,item,click,3",
                                 "u3,i2,user,item,buy,4", "u3,i3,user,item,buy,5",
                                 "u1,i3,user,item,click,6", "u2,i2,user,item,click,7",
                                 "u3,i1,user,item,click,8", "u4,i1,user,item,buy,9"}));
  CHECK(edges.size() == 10);
  std::set<std::string> types;
  for (const auto& e : edges) types.insert(e.edge_type);
  CHECK(types.size() == 2);
}

TEST_CASE("parse_edges: stored endpoints are ordered") {
  const auto e = parse(rows({"zed,amy,user,item,x,1"})).front();
  CHECK(e.src == "amy");
  CHECK(e.src_type == "item");
  CHECK(e.dst == "zed");
}

TEST_CASE("parse_edges: errors carry line numbers") {
  auto message_of = [](const std::string& csv) -> std::string {
    try {
      parse(csv);
    } catch (const ParseError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message_of(rows({"a,b,u,u,x,1", "a,b,u,u,x"})).find("line 3") != std::string::npos);
  CHECK(message_of(rows({"a,b,u,u,x,1.5"})).find("line 2") != std::string::npos);
  CHECK(message_of(rows({"a,b,u,u,x,-1"})).find("line 2") != std::string::npos);
  CHECK_THROWS_AS(parse(rows({"a,b,user,item,x,1", "a,c,item,item,x,2"})), SchemaConflictError);
  CHECK_THROWS_AS(parse("src,dst\n"), ParseError);
}

TEST_CASE("parse_edges: custom column mapping") {
  std::istringstream in("from,to,ft,tt,kind,when\na,b,u,u,x,1\n");
  ColumnMapping m{"from", "to", "ft", "tt", "kind", "when"};
  const auto edges = parse_edges(in, m);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].timestamp == 1);
}

TEST_CASE("partition_snapshots: single window is insufficient") {
  const auto edges = parse(rows({"a,b,u,u,x,0", "a,c,u,u,x,9"}));
  CHECK_THROWS_AS(partition_snapshots(edges, PartitionPolicy::window_length(10)),
                  InsufficientSpanError);
}

TEST_CASE("partition_snapshots: 60 days at window 12 gives 5 snapshots") {
  std::vector<TemporalEdge> edges;
  for (int day = 0; day < 60; ++day) {
    edges.push_back({"a" + std::to_string(day % 7), "b" + std::to_string(day % 5), "u", "v", "x",
                     day});
  }
  const auto thn = partition_snapshots(edges, PartitionPolicy::window_length(12));
  CHECK(thn.snapshots.size() == 5);
  CHECK(thn.training_span() == 4);
  CHECK(thn.snapshots[1].start == 12);
  CHECK(thn.snapshots[1].end == 24);
}

TEST_CASE("partition_snapshots: snapshot count and totality") {
  Rng rng(3);
  std::vector<TemporalEdge> edges;
  for (int i = 0; i < 200; ++i) {
    const auto a = "n" + std::to_string(rng.below(30));
    auto b = "n" + std::to_string(rng.below(30));
    if (a == b) b += "x";
    edges.push_back({std::min(a, b), std::max(a, b), "t", "t", "r" + std::to_string(rng.below(3)),
                     static_cast<std::int64_t>(rng.below(97))});
  }
  std::ostringstream csv;
  csv << kHeader;
  for (const auto& e : edges) {
    csv << e.src << ',' << e.dst << ',' << e.src_type << ',' << e.dst_type << ',' << e.edge_type
        << ',' << e.timestamp << '\n';
  }
  const auto dedup = parse(csv.str());
  const auto thn = partition_snapshots(dedup, PartitionPolicy::snapshot_count(4));
  CHECK(thn.snapshots.size() <= 4);

  // Brute-force membership: each (pair, type, window) lands in exactly one snapshot.
  std::set<std::tuple<NodeIndex, NodeIndex, int, int>> expected, actual;
  std::map<std::string, int> type_of;
  for (std::size_t r = 0; r < thn.edge_types.size(); ++r) {
    type_of[thn.edge_types[r]] = static_cast<int>(r);
  }
  for (const auto& e : dedup) {
    const auto [a, b] = normalized(thn.registry.at(e.src), thn.registry.at(e.dst));
    const int t = static_cast<int>((e.timestamp - thn.t_min) / thn.window);
    expected.emplace(a, b, type_of[e.edge_type], t);
  }
  std::size_t total = 0;
  for (std::size_t t = 0; t < thn.snapshots.size(); ++t) {
    for (const auto& e : thn.snapshots[t].edges) {
      actual.emplace(e.src, e.dst, e.type, static_cast<int>(t));
      ++total;
      CHECK(thn.snapshots[t].contains(e.src));
      CHECK(thn.snapshots[t].contains(e.dst));
    }
  }
  CHECK(total == actual.size());
  CHECK(actual == expected);
}

TEST_CASE("partition_snapshots: empty intermediate snapshots are kept") {
  const auto edges = parse(rows({"a,b,u,u,x,0", "a,c,u,u,x,25"}));
  const auto thn = partition_snapshots(edges, PartitionPolicy::window_length(10));
  REQUIRE(thn.snapshots.size() == 3);
  CHECK(thn.snapshots[1].empty());
  CHECK(thn.snapshots[1].index == 2);
}

TEST_CASE("build_typed_subgraphs: one edge of type A") {
  const auto subs = build_typed_subgraphs(snapshot({{0, 1, 0}}), 2);
  REQUIRE(subs.size() == 2);
  const auto& a = subs[0];
  CHECK(a.nodes == std::vector<NodeIndex>{0, 1});
  CHECK(a.neighbors.size() == 4);  // one edge both ways + 2 self-loops
  CHECK(a.degree == std::vector<std::int32_t>{1, 1});
  CHECK(subs[1].empty());
}

TEST_CASE("build_typed_subgraphs: self-loop only input is unchanged") {
  const auto sub = build_typed_subgraphs(snapshot({{2, 2, 0}}), 1)[0];
  CHECK(sub.nodes == std::vector<NodeIndex>{2});
  CHECK(sub.neighbors == std::vector<std::int32_t>{0});
  CHECK(sub.degree == std::vector<std::int32_t>{0});
}

TEST_CASE("build_typed_subgraphs: per-type counts, symmetry, self-loops") {
  std::vector<SnapshotEdge> edges;
  Rng rng(5);
  while (edges.size() < 20) {
    const auto a = static_cast<NodeIndex>(rng.below(12));
    const auto b = static_cast<NodeIndex>(rng.below(12));
    if (a == b) continue;
    const SnapshotEdge e{std::min(a, b), std::max(a, b), static_cast<std::int32_t>(rng.below(3))};
    if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
  }
  const auto subs = build_typed_subgraphs(snapshot(edges), 3);
  std::size_t sum = 0;
  for (const auto& sub : subs) {
    sum += sub.edge_count;
    for (std::size_t a = 0; a < sub.size(); ++a) {
      const auto nb = sub.neighbors_of(a);
      CHECK(std::find(nb.begin(), nb.end(), static_cast<std::int32_t>(a)) != nb.end());
      CHECK(static_cast<std::int32_t>(nb.size()) == sub.degree[a] + 1);
      for (auto b : nb) {
        const auto back = sub.neighbors_of(static_cast<std::size_t>(b));
        CHECK(std::find(back.begin(), back.end(), static_cast<std::int32_t>(a)) != back.end());
      }
    }
  }
  CHECK(sum == 20);
}

TEST_CASE("build_typed_subgraphs: unknown type is a configuration error") {
  CHECK_THROWS_AS(build_typed_subgraphs(snapshot({{0, 1, 4}}), 2), ConfigError);
}

namespace {

TemporalHeterogeneousNetwork network(const std::string& csv, std::int64_t window = 1) {
  const auto edges = parse(csv);
  return partition_snapshots(edges, PartitionPolicy::window_length(window));
}

}  // namespace

TEST_CASE("clean_future_nodes: identity without new nodes") {
  const auto thn = network(rows({"a,b,u,u,x,0", "b,c,u,u,x,0", "a,c,u,u,x,1"}));
  const auto clean = clean_future_nodes(thn);
  CHECK(clean.registry.size() == thn.registry.size());
  CHECK(clean.evaluation().edges == thn.evaluation().edges);
}

TEST_CASE("clean_future_nodes: only new nodes empties the evaluation snapshot") {
  const auto clean = clean_future_nodes(network(rows({"a,b,u,u,x,0", "c,d,u,u,x,1"})));
  CHECK(clean.evaluation().empty());
  CHECK(clean.registry.size() == 2);
  CHECK_THROWS_AS(make_eval_split(clean, 0), InsufficientSpanError);
}

TEST_CASE("clean_future_nodes: removes exactly the new nodes and their links") {
  // Old: o1..o5. New in the evaluation snapshot: f1, f2, f3.
  const auto thn = network(rows({"o1,o2,u,u,x,0", "o2,o3,u,u,x,0", "o3,o4,u,u,x,0",
                                 "o4,o5,u,u,x,0", "o1,o5,u,u,x,1", "o1,f1,u,u,x,1",
                                 "f2,f3,u,u,x,1", "o2,f3,u,u,x,1", "o3,o5,u,u,x,1"}));
  const auto clean = clean_future_nodes(thn);
  CHECK(clean.registry.size() == 5);
  CHECK_FALSE(clean.registry.contains("f1"));
  CHECK_FALSE(clean.registry.contains("f3"));
  CHECK(clean.evaluation().edges.size() == 2);
  CHECK(clean.snapshots[0].edges.size() == 4);
  CHECK(clean.evaluation().nodes == std::vector<NodeIndex>{clean.registry.at("o1"), clean.registry.at("o3"), clean.registry.at("o5")});
}

namespace {

// Line graph over `n` old nodes in snapshot 0, then `links` pairs among them in snapshot 1.
TemporalHeterogeneousNetwork dense_fixture(int n, int links, std::uint64_t seed) {
  std::ostringstream csv;
  csv << kHeader;
  for (int i = 0; i + 1 < n; ++i) csv << "v" << i << ",v" << i + 1 << ",u,u,x,0\n";
  Rng rng(seed);
  std::set<std::pair<int, int>> chosen;
  while (static_cast<int>(chosen.size()) < links) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    if (chosen.emplace(std::min(a, b), std::max(a, b)).second) {
      csv << "v" << a << ",v" << b << ",u,u,x,1\n";
    }
  }
  return clean_future_nodes(network(csv.str()));
}

}  // namespace

TEST_CASE("make_eval_split: 10 positives split 2/2/6") {
  const auto split = make_eval_split(dense_fixture(12, 10, 1), 0, 1);
  CHECK(split.val_pos.size() == 2);
  CHECK(split.train_pos.size() == 2);
  CHECK(split.test_pos.size() == 6);
  CHECK(split.val_neg.size() == 2);
  CHECK(split.train_neg.size() == 2);
  CHECK(split.test_neg.size() == 6);
}

TEST_CASE("make_eval_split: deterministic, disjoint, exhaustive negative validity") {
  const auto thn = dense_fixture(12, 20, 2);
  const auto a = make_eval_split(thn, 9, 2);
  const auto b = make_eval_split(thn, 9, 2);
  CHECK(a.train_pos == b.train_pos);
  CHECK(a.test_neg == b.test_neg);

  std::set<NodePair> pos;
  for (const auto* s : {&a.train_pos, &a.val_pos, &a.test_pos}) {
    for (const auto& p : *s) CHECK(pos.insert(p).second);
  }
  const auto all = link_pairs(thn.evaluation());
  CHECK(pos == std::set<NodePair>(all.begin(), all.end()));

  // Enumerate every pair to build the forbidden sets independently.
  std::set<NodePair> history, future;
  for (const auto& g : thn.training()) {
    for (const auto& e : g.edges) history.insert(normalized(e.src, e.dst));
  }
  for (const auto& e : thn.evaluation().edges) future.insert(normalized(e.src, e.dst));
  std::set<NodePair> eval_negs;
  for (const auto& p : a.train_neg) {
    CHECK(p.first < p.second);
    CHECK_FALSE(history.contains(p));
  }
  CHECK(std::set<NodePair>(a.train_neg.begin(), a.train_neg.end()).size() == a.train_neg.size());
  for (const auto* s : {&a.val_neg, &a.test_neg}) {
    for (const auto& p : *s) {
      CHECK_FALSE(future.contains(p));
      CHECK(eval_negs.insert(p).second);
    }
  }
  CHECK(a.train_neg.size() == 2 * a.train_pos.size());
}

TEST_CASE("make_eval_split: too dense for the requested negatives") {
  // 4 nodes, 6 pairs: all linked in the evaluation snapshot.
  const auto thn = network(rows({"a,b,u,u,x,0", "b,c,u,u,x,0", "c,d,u,u,x,0", "a,b,u,u,x,1",
                                 "a,c,u,u,x,1", "a,d,u,u,x,1", "b,c,u,u,x,1", "b,d,u,u,x,1",
                                 "c,d,u,u,x,1"}));
  CHECK_THROWS_AS(make_eval_split(clean_future_nodes(thn), 0, 1), NegativeExhaustionError);
}

TEST_CASE("init_features: range, determinism, mean") {
  const auto one = init_features(1, 1, 4);
  CHECK(std::abs(one.matrix(0, 0)) <= std::sqrt(6.0));
  CHECK(one.trainable);

  const auto a = init_features(1000, 32, 11);
  const auto b = init_features(1000, 32, 11);
  CHECK(a.matrix == b.matrix);
  CHECK(std::abs(a.matrix.mean()) < 0.02);
  CHECK(a.matrix.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 32));
  CHECK_THROWS_AS(init_features(3, 0, 1), ParameterError);
}

TEST_CASE("ingested directory and split round-trip") {
  const auto thn = dense_fixture(12, 20, 3);
  const auto dir = scratch("ingest");
  write_ingested(dir, thn);
  CHECK(std::filesystem::exists(dir / "snapshots.json"));
  CHECK(std::filesystem::exists(dir / "snapshot_1.csv"));
  const auto back = read_ingested(dir);
  CHECK(back.registry.size() == thn.registry.size());
  CHECK(back.edge_types == thn.edge_types);
  REQUIRE(back.snapshots.size() == thn.snapshots.size());
  for (std::size_t t = 0; t < thn.snapshots.size(); ++t) {
    CHECK(back.snapshots[t].edges == thn.snapshots[t].edges);
    CHECK(back.snapshots[t].start == thn.snapshots[t].start);
  }

  const auto split = make_eval_split(thn, 5, 1);
  write_split(dir / "split.json", split, thn.registry);
  const auto again = read_split(dir / "split.json", back.registry);
  CHECK(again.test_pos == split.test_pos);
  CHECK(again.val_neg == split.val_neg);
  CHECK(again.seed == 5);
  std::filesystem::remove_all(dir);
}

TEST_CASE("read_ingested: version and missing files") {
  const auto dir = scratch("bad_ingest");
  CHECK_THROWS(read_ingested(dir));
  const auto thn = dense_fixture(6, 3, 4);
  write_ingested(dir, thn);
  {
    std::ifstream in(dir / "snapshots.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"format_version\": 7");
    std::ofstream(dir / "snapshots.json") << text;
  }
  CHECK_THROWS_AS(read_ingested(dir), UnsupportedVersionError);
  std::filesystem::remove_all(dir);
}

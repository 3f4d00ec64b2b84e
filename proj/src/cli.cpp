#include "clp/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "clp/synth.hpp"
#include "clp/trainer.hpp"

namespace clp {

namespace {

namespace fs = std::filesystem;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << j.dump(2) << '\n';
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json metrics_json(const LinkMetrics& m, std::uint64_t seed, const TrainConfig& cfg) {
  return {{"auc", m.auc},  {"ap", m.ap},     {"n_pos", m.n_pos},
          {"n_neg", m.n_neg}, {"seed", seed}, {"config", cfg.to_json()}};
}

TemporalHeterogeneousNetwork ingest(const fs::path& edges_file, const TrainConfig& cfg,
                                    std::optional<std::int64_t> window,
                                    std::optional<std::int64_t> snapshots) {
  std::ifstream in(edges_file);
  if (!in) throw IoError("cannot read '" + edges_file.string() + "'");
  const auto edges = parse_edges(in);
  if (!window) window = cfg.window;
  if (!snapshots) snapshots = cfg.snapshots;
  if (window && snapshots) throw UsageError("give either --window or --snapshots, not both");
  const PartitionPolicy policy = window ? PartitionPolicy::window_length(*window)
                                        : PartitionPolicy::snapshot_count(snapshots.value_or(2));
  return clean_future_nodes(partition_snapshots(edges, policy));
}

// Trains on `data`, writes checkpoint, split, log and test metrics to `out`.
int train_to(const TrainConfig& cfg, const fs::path& data, const fs::path& out) {
  const auto thn = read_ingested(data);
  const auto split = make_eval_split(thn, cfg.hp.seed, cfg.neg_ratio);
  fs::create_directories(out);
  write_split(out / "split.json", split, thn.registry);

  std::ofstream log(out / "train_log.jsonl");
  if (!log) throw IoError("cannot write '" + (out / "train_log.jsonl").string() + "'");
  const auto result = train(thn, split, cfg, [&](const EpochRecord& rec) {
    log << rec.to_json().dump() << '\n';
    log.flush();
    std::cerr << "epoch " << rec.epoch << " loss " << rec.total << " val_auc " << rec.val_auc
              << " val_ap " << rec.val_ap << '\n';
  });
  save_checkpoint(result.best, out);
  if (result.numeric_failure) throw NumericError(*result.numeric_failure);

  const auto metrics = evaluate_checkpoint(result.best, thn, split.test_pos, split.test_neg);
  write_json(out / "metrics.json", metrics_json(metrics, cfg.hp.seed, cfg));
  std::cout << metrics_json(metrics, cfg.hp.seed, cfg).dump() << '\n';
  return 0;
}

TrainConfig config_or_default(const std::string& path) {
  return path.empty() ? TrainConfig{} : load_config(path);
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Contrastive link prediction on temporal heterogeneous networks"};
  app.footer(config_help());
  app.require_subcommand(1);

  std::string edges, out, data, config, model, split_file, grid_file, variant, dump_file;
  std::optional<std::int64_t> window, snapshots;
  int jobs = 1;
  SynthConfig synth;
  GradCheckInstance inst;
  int gc_dim = 4;

  auto* ingest_cmd = app.add_subcommand("ingest", "partition an edge CSV into snapshots");
  ingest_cmd->add_option("--edges", edges, "CSV with src,dst,src_type,dst_type,edge_type,timestamp")
      ->required();
  ingest_cmd->add_option("--out", out, "output directory")->required();
  ingest_cmd->add_option("--config", config, "config file (window/snapshots keys)");
  auto* wopt = ingest_cmd->add_option("--window", window, "snapshot window length");
  ingest_cmd->add_option("--snapshots", snapshots, "number of snapshots")->excludes(wopt);

  auto* train_cmd = app.add_subcommand("train", "train, checkpoint and evaluate on the test split");
  train_cmd->add_option("--config", config)->required();
  train_cmd->add_option("--data", data, "ingested directory")->required();
  train_cmd->add_option("--out", out, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on the test split");
  eval_cmd->add_option("--model", model, "checkpoint directory")->required();
  eval_cmd->add_option("--data", data)->required();
  eval_cmd->add_option("--split", split_file, "split.json")->required();
  eval_cmd->add_option("--out", out, "metrics.json path (default: stdout only)");
  eval_cmd->add_option("--dump-embeddings", dump_file, "also write every intermediate embedding as CSV");

  auto* ablate_cmd = app.add_subcommand("ablate", "train one ablation variant");
  ablate_cmd->add_option("--config", config)->required();
  ablate_cmd->add_option("--data", data)->required();
  ablate_cmd->add_option("--variant", variant)
      ->required()
      ->check(CLI::IsMember({"no_node", "no_edge", "no_time"}));
  ablate_cmd->add_option("--out", out, "output directory (default: ablate_<variant>)");

  auto* grid_cmd = app.add_subcommand("grid", "grid search over `key = v1, v2` lines");
  grid_cmd->add_option("--config", config)->required();
  grid_cmd->add_option("--grid", grid_file, "grid file (default: tied lambda x tau)");
  grid_cmd->add_option("--data", data)->required();
  grid_cmd->add_option("--jobs", jobs, "parallel cells")->check(CLI::PositiveNumber);
  grid_cmd->add_option("--out", out, "results JSON path");

  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc_cmd->add_option("--config", config);
  gc_cmd->add_option("--nodes", inst.nodes)->capture_default_str();
  gc_cmd->add_option("--span", inst.span, "training snapshots")->capture_default_str();
  gc_cmd->add_option("--types", inst.types)->capture_default_str();
  gc_cmd->add_option("--seed", inst.seed)->capture_default_str();
  gc_cmd->add_option("--dim", gc_dim)->capture_default_str();

  auto* synth_cmd = app.add_subcommand("synth", "planted two-community temporal network");
  synth_cmd->add_option("--nodes", synth.nodes)->capture_default_str();
  synth_cmd->add_option("--types", synth.types)->capture_default_str();
  synth_cmd->add_option("--snapshots", synth.snapshots, "total snapshots")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", out)->required();

  auto* curves_cmd = app.add_subcommand("curves", "ROC/PR points on the test split");
  curves_cmd->add_option("--model", model)->required();
  curves_cmd->add_option("--data", data)->required();
  curves_cmd->add_option("--out", out, "curves.csv path")->required();
  curves_cmd->add_option("--split", split_file, "split.json (default: <model>/split.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return 0;
    }
    std::cerr << "error: usage_error: " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (*ingest_cmd) {
      const auto cfg = config_or_default(config);
      const auto thn = ingest(edges, cfg, window, snapshots);
      write_ingested(out, thn);
      std::cout << "ingested " << thn.registry.size() << " nodes into " << thn.snapshots.size()
                << " snapshots\n";
    } else if (*train_cmd) {
      return train_to(load_config(config), data, out);
    } else if (*ablate_cmd) {
      auto cfg = load_config(config);
      cfg.hp.ablation = parse_ablation(variant);
      return train_to(cfg, data, out.empty() ? "ablate_" + variant : out);
    } else if (*eval_cmd) {
      const auto ckpt = load_checkpoint(model);
      const auto thn = read_ingested(data);
      const auto split = read_split(split_file, thn.registry);
      const auto m = evaluate_checkpoint(ckpt, thn, split.test_pos, split.test_neg);
      const auto j = metrics_json(m, ckpt.seed, ckpt.config);
      if (!out.empty()) write_json(out, j);
      if (!dump_file.empty()) write_embedding_dump(dump_file, ckpt, thn);
      std::cout << j.dump() << '\n';
    } else if (*curves_cmd) {
      const auto ckpt = load_checkpoint(model);
      const auto thn = read_ingested(data);
      const auto split =
          read_split(split_file.empty() ? fs::path(model) / "split.json" : fs::path(split_file),
                     thn.registry);
      write_curves(out, score_links(final_embeddings(ckpt, thn), split.test_pos, split.test_neg));
    } else if (*grid_cmd) {
      const auto base = load_config(config);
      const auto cells = expand_grid(base, grid_file.empty() ? default_grid() : read_text(grid_file));
      const auto thn = read_ingested(data);
      const auto split = make_eval_split(thn, base.hp.seed, base.neg_ratio);
      const auto rows = grid_search(thn, split, cells, jobs, &std::cerr);
      nlohmann::json table = nlohmann::json::array();
      for (const auto& r : rows) {
        nlohmann::json row = {{"config", r.config.to_json()}, {"val_ap", r.val_ap},
                              {"val_auc", r.val_auc}, {"best_epoch", r.best_epoch}};
        if (r.error) row["error"] = *r.error;
        table.push_back(row);
        std::cout << "d=" << r.config.hp.dim << " heads=" << r.config.hp.heads
                  << " tau=" << r.config.hp.tau << " val_ap=" << r.val_ap
                  << " val_auc=" << r.val_auc << (r.error ? " error=" + one_line(*r.error) : "")
                  << '\n';
      }
      if (!out.empty()) write_json(out, table);
    } else if (*gc_cmd) {
      auto cfg = config_or_default(config);
      cfg.hp.dim = gc_dim;
      const auto report = gradient_check(cfg, inst);
      for (const auto& g : report.groups) {
        std::cout << g.group << " n=" << g.count << " rel_error=" << g.rel_error
                  << " max_abs_error=" << g.max_abs_error << '\n';
      }
      std::cout << "max_rel_error " << report.max_rel_error << '\n';
      if (!(report.max_rel_error < 1e-4)) {
        throw NumericError("gradient check failed: max relative error " +
                           std::to_string(report.max_rel_error));
      }
    } else if (*synth_cmd) {
      const auto generated = generate_planted(synth);
      fs::create_directories(out);
      {
        std::ofstream csv(fs::path(out) / "edges.csv");
        if (!csv) throw IoError("cannot write '" + (fs::path(out) / "edges.csv").string() + "'");
        csv << "src,dst,src_type,dst_type,edge_type,timestamp\n";
        for (const auto& e : generated) {
          csv << e.src << ',' << e.dst << ',' << e.src_type << ',' << e.dst_type << ','
              << e.edge_type << ',' << e.timestamp << '\n';
        }
      }
      const auto thn = planted_network(synth);
      write_ingested(out, thn);
      std::cout << "wrote " << generated.size() << " edges, " << thn.registry.size() << " nodes, "
                << thn.snapshots.size() << " snapshots to " << out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.tag() << ": " << one_line(e.what()) << '\n';
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: parse_error: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal_error: " << one_line(e.what()) << '\n';
    return 2;
  }
  return 0;
}

}  // namespace clp

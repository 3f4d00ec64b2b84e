#include "clp/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "clp/synth.hpp"

namespace clp {

// ---------------------------------------------------------------------------
// Optimizer and stopping rule

Adam::Adam(const ModelShape& shape, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(zero_parameters(shape)),
      v_(zero_parameters(shape)) {}

void Adam::step(ModelParameters& params, const ModelParameters& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<Mat*> p, m, v;
  std::vector<const Mat*> g;
  params.visit([&](const std::string&, const std::string&, Mat& x) { p.push_back(&x); });
  m_.visit([&](const std::string&, const std::string&, Mat& x) { m.push_back(&x); });
  v_.visit([&](const std::string&, const std::string&, Mat& x) { v.push_back(&x); });
  grad.visit([&](const std::string&, const std::string&, const Mat& x) { g.push_back(&x); });
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto mi = m[i]->array();
    auto vi = v[i]->array();
    const auto gi = g[i]->array();
    mi = beta1_ * mi + (1.0 - beta1_) * gi;
    vi = beta2_ * vi + (1.0 - beta2_) * gi.square();
    p[i]->array() -= lr_ * (mi / c1) / ((vi / c2).sqrt() + eps_);
  }
}

bool EarlyStopper::observe(int epoch, double value) {
  if (value > best_) {
    best_ = value;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

nlohmann::json shape_json(const ModelShape& s) {
  return {{"num_nodes", s.num_nodes},
          {"dim", s.dim},
          {"heads", s.heads},
          {"num_types", s.num_types},
          {"span", s.span},
          {"share_params_across_time", s.share_params_across_time}};
}

ModelShape shape_from_json(const nlohmann::json& j) {
  ModelShape s;
  s.num_nodes = j.at("num_nodes").get<std::size_t>();
  s.dim = j.at("dim").get<int>();
  s.heads = j.at("heads").get<int>();
  s.num_types = j.at("num_types").get<int>();
  s.span = j.at("span").get<int>();
  s.share_params_across_time = j.at("share_params_across_time").get<bool>();
  return s;
}

void put_le(std::ostream& out, float f) {
  auto u = std::bit_cast<std::uint32_t>(f);
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

float get_le(const unsigned char* bytes) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return std::bit_cast<float>(u);
}

}  // namespace

Checkpoint make_checkpoint(const ModelParameters& params, const TrainConfig& cfg, int epoch,
                           double best_val_ap) {
  Checkpoint c;
  c.shape = params.shape;
  c.config = cfg;
  c.epoch = epoch;
  c.best_val_ap = best_val_ap;
  c.seed = cfg.hp.seed;
  params.visit([&](const std::string& name, const std::string&, const Mat& m) {
    NamedArray a{name, m.rows(), m.cols(), {}};
    a.data.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      a.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
    }
    c.arrays.push_back(std::move(a));
  });
  return c;
}

ModelParameters restore_parameters(const Checkpoint& ckpt) {
  ModelParameters p = zero_parameters(ckpt.shape);
  std::size_t next = 0;
  p.visit([&](const std::string& name, const std::string&, Mat& m) {
    if (next >= ckpt.arrays.size()) throw IntegrityError("checkpoint lacks array '" + name + "'");
    const auto& a = ckpt.arrays[next++];
    if (a.name != name || a.rows != m.rows() || a.cols != m.cols() ||
        a.data.size() != static_cast<std::size_t>(m.size())) {
      throw IntegrityError("checkpoint array '" + a.name + "' does not match expected '" + name +
                           "'");
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = a.data[static_cast<std::size_t>(i)];
  });
  if (next != ckpt.arrays.size()) throw IntegrityError("checkpoint has unexpected extra arrays");
  return p;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json arrays = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : ckpt.arrays) {
    const std::size_t bytes = a.data.size() * 4;
    arrays.push_back({{"name", a.name}, {"shape", {a.rows, a.cols}}, {"offset", offset},
                      {"bytes", bytes}});
    offset += bytes;
  }
  nlohmann::json manifest = {{"format_version", kCheckpointVersion},
                             {"dtype", "float32"},
                             {"byte_order", "little"},
                             {"epoch", ckpt.epoch},
                             {"best_val_ap", ckpt.best_val_ap},
                             {"seed", ckpt.seed},
                             {"shape", shape_json(ckpt.shape)},
                             {"config", ckpt.config.to_json()},
                             {"arrays", arrays},
                             {"total_bytes", offset}};
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write '" + (dir / "manifest.json").string() + "'");
    out << manifest.dump(2) << '\n';
  }
  std::ofstream blob(dir / "params.bin", std::ios::binary);
  if (!blob) throw IoError("cannot write '" + (dir / "params.bin").string() + "'");
  for (const auto& a : ckpt.arrays) {
    for (float f : a.data) put_le(blob, f);
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read '" + (dir / "manifest.json").string() + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("manifest.json: ") + e.what());
  }
  try {
    const int version = m.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw UnsupportedVersionError("checkpoint format_version " + std::to_string(version) +
                                    " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    if (m.at("dtype") != "float32") throw IntegrityError("checkpoint dtype must be float32");

    std::ifstream blob_in(dir / "params.bin", std::ios::binary);
    if (!blob_in) throw IoError("cannot read '" + (dir / "params.bin").string() + "'");
    const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(blob_in)),
                                          std::istreambuf_iterator<char>());
    const auto total = m.at("total_bytes").get<std::size_t>();
    if (blob.size() != total) {
      throw IntegrityError("params.bin has " + std::to_string(blob.size()) + " bytes, manifest says " +
                           std::to_string(total));
    }

    Checkpoint c;
    c.shape = shape_from_json(m.at("shape"));
    c.config = TrainConfig::from_json(m.at("config"));
    c.epoch = m.at("epoch").get<int>();
    c.best_val_ap = m.at("best_val_ap").get<double>();
    c.seed = m.at("seed").get<std::uint64_t>();
    std::size_t expected_offset = 0;
    for (const auto& ja : m.at("arrays")) {
      NamedArray a;
      a.name = ja.at("name").get<std::string>();
      a.rows = ja.at("shape").at(0).get<Eigen::Index>();
      a.cols = ja.at("shape").at(1).get<Eigen::Index>();
      const auto offset = ja.at("offset").get<std::size_t>();
      const auto bytes = ja.at("bytes").get<std::size_t>();
      if (offset != expected_offset || bytes != static_cast<std::size_t>(a.rows * a.cols) * 4 ||
          offset + bytes > blob.size()) {
        throw IntegrityError("array '" + a.name + "' has inconsistent offset or length");
      }
      a.data.resize(bytes / 4);
      for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = get_le(&blob[offset + 4 * i]);
      expected_offset += bytes;
      c.arrays.push_back(std::move(a));
    }
    if (expected_offset != total) throw IntegrityError("arrays do not cover params.bin");
    restore_parameters(c);  // validates names and shapes
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("manifest.json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch},
          {"l_main", losses.main},
          {"l_node_pos", losses.node_pos},
          {"l_node_neg", losses.node_neg},
          {"l_edge_pos", losses.edge_pos},
          {"l_edge_neg", losses.edge_neg},
          {"l_time_L", losses.time_long},
          {"l_time_S", losses.time_short},
          {"l_total", total},
          {"val_auc", val_auc},
          {"val_ap", val_ap},
          {"seconds", seconds}};
}

namespace {

void accumulate(LossComponents& into, const LossComponents& c) {
  into.main += c.main;
  into.node_pos += c.node_pos;
  into.node_neg += c.node_neg;
  into.edge_pos += c.edge_pos;
  into.edge_neg += c.edge_neg;
  into.time_long += c.time_long;
  into.time_short += c.time_short;
}

void scale(LossComponents& c, double s) {
  c.main *= s;
  c.node_pos *= s;
  c.node_neg *= s;
  c.edge_pos *= s;
  c.edge_neg *= s;
  c.time_long *= s;
  c.time_short *= s;
}

}  // namespace

TrainResult train(const TemporalHeterogeneousNetwork& thn, const EvalSplit& split,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto& hp = cfg.hp;
  const GraphContext ctx = build_context(thn);
  const Supervision sup = make_supervision(split, thn, cfg.supervision_source);
  ModelParameters params = init_parameters(shape_for(ctx, cfg), hp.seed);
  Adam adam(params.shape, hp.lr);
  EarlyStopper stopper(hp.patience);

  TrainResult result;
  bool have_best = false;
  using Clock = std::chrono::steady_clock;
  for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    const auto start = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    const auto batches = sample_triples(sup, hp.batch_size, hp.seed, epoch);
    try {
      for (const auto& batch : batches) {
        ModelParameters grad = zero_parameters(params.shape);
        const auto report = evaluate_objective(params, ctx, cfg, batch, &grad);
        accumulate(rec.losses, report.components);
        rec.total += report.total;
        adam.step(params, grad);
      }
    } catch (const NumericError& e) {
      result.numeric_failure = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    scale(rec.losses, 1.0 / static_cast<double>(batches.size()));
    rec.total /= static_cast<double>(batches.size());

    // Validate the float32 snapshot so the stored checkpoint reproduces the score.
    Checkpoint snapshot = make_checkpoint(params, cfg, epoch, 0.0);
    const Mat emb = embed(restore_parameters(snapshot), ctx).final;
    if (!emb.allFinite()) {
      result.numeric_failure = "epoch " + std::to_string(epoch) + ": non-finite embeddings";
      break;
    }
    const auto val = evaluate_links(emb, split.val_pos, split.val_neg);
    rec.val_auc = val.auc;
    rec.val_ap = val.ap;
    if (stopper.observe(epoch, val.ap)) {
      snapshot.best_val_ap = val.ap;
      result.best = std::move(snapshot);
      have_best = true;
    }
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  if (!have_best) result.best = make_checkpoint(params, cfg, 0, 0.0);
  return result;
}

Mat final_embeddings(const Checkpoint& ckpt, const TemporalHeterogeneousNetwork& thn) {
  const GraphContext ctx = build_context(thn);
  const ModelParameters params = restore_parameters(ckpt);
  if (params.shape.num_nodes != ctx.num_nodes || params.shape.num_types != ctx.num_types ||
      params.shape.span != ctx.span()) {
    throw IntegrityError("checkpoint shape does not match the dataset");
  }
  return embed(params, ctx).final;
}

void write_embedding_dump(const std::filesystem::path& file, const Checkpoint& ckpt,
                          const TemporalHeterogeneousNetwork& thn) {
  const GraphContext ctx = build_context(thn);
  const ModelParameters params = restore_parameters(ckpt);
  if (params.shape.num_nodes != ctx.num_nodes || params.shape.num_types != ctx.num_types ||
      params.shape.span != ctx.span()) {
    throw IntegrityError("checkpoint shape does not match the dataset");
  }
  const Embeddings emb = embed(params, ctx);
  std::ofstream out(file);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out.precision(17);
  out << "node_id,stage,snapshot,edge_type";
  for (int i = 0; i < params.shape.dim; ++i) out << ",v_" << i;
  out << '\n';
  auto row = [&](NodeIndex v, const char* stage, const std::string& snapshot,
                 const std::string& type, const auto& values) {
    out << thn.registry.info(v).id << ',' << stage << ',' << snapshot << ',' << type;
    for (Eigen::Index i = 0; i < values.size(); ++i) out << ',' << values(i);
    out << '\n';
  };
  for (int t = 0; t < ctx.span(); ++t) {
    const auto ts = std::to_string(t + 1);
    const auto& subs = ctx.subgraphs[static_cast<std::size_t>(t)];
    for (std::size_t r = 0; r < subs.size(); ++r) {
      const auto& type = thn.edge_types[r];
      const auto& U = emb.node_u[static_cast<std::size_t>(t)][r];
      const auto& H = emb.node_h[static_cast<std::size_t>(t)][r];
      for (std::size_t i = 0; i < subs[r].size(); ++i) {
        row(subs[r].nodes[i], "node_u", ts, type, U.row(static_cast<Eigen::Index>(i)));
      }
      for (std::size_t i = 0; i < subs[r].size(); ++i) {
        row(subs[r].nodes[i], "node_h", ts, type, H.row(static_cast<Eigen::Index>(i)));
      }
    }
    const auto& layout = ctx.layouts[static_cast<std::size_t>(t)];
    for (const auto* stage : {"edge_u", "edge_h"}) {
      const Mat& M = std::string(stage) == "edge_u" ? emb.edge_u[static_cast<std::size_t>(t)]
                                                    : emb.edge_h[static_cast<std::size_t>(t)];
      for (std::size_t i = 0; i < layout.size(); ++i) {
        row(layout.nodes[i], stage, ts, "", M.row(static_cast<Eigen::Index>(i)));
      }
    }
  }
  const std::pair<const char*, const Mat*> pooled[] = {
      {"long_term", &emb.long_term}, {"short_term", &emb.short_term}, {"final", &emb.final}};
  for (const auto& [stage, M] : pooled) {
    for (Eigen::Index v = 0; v < M->rows(); ++v) row(static_cast<NodeIndex>(v), stage, "", "", M->row(v));
  }
}

LinkMetrics evaluate_checkpoint(const Checkpoint& ckpt, const TemporalHeterogeneousNetwork& thn,
                                std::span<const NodePair> positives,
                                std::span<const NodePair> negatives) {
  return evaluate_links(final_embeddings(ckpt, thn), positives, negatives);
}

// ---------------------------------------------------------------------------
// Gradient check

TemporalHeterogeneousNetwork gradcheck_network(const GradCheckInstance& inst) {
  SynthConfig sc;
  sc.nodes = inst.nodes;
  sc.types = inst.types;
  sc.snapshots = inst.span + 1;
  sc.seed = inst.seed;
  sc.p_in = 0.35;
  sc.p_out = 0.08;
  sc.drift = 0.3;
  return planted_network(sc);
}

GradCheckReport gradient_check(const TrainConfig& cfg, const GradCheckInstance& inst, double h,
                               const std::function<void(ModelParameters&)>& corrupt,
                               bool zero_params) {
  const auto thn = gradcheck_network(inst);
  const auto split = make_eval_split(thn, inst.seed, cfg.neg_ratio);
  const auto sup = make_supervision(split, thn, cfg.supervision_source);
  const auto batch = sample_triples(sup, cfg.hp.batch_size, inst.seed, 0).front();
  const GraphContext ctx = build_context(thn);
  const ModelShape shape = shape_for(ctx, cfg);
  ModelParameters params = zero_params ? zero_parameters(shape) : init_parameters(shape, inst.seed);

  ModelParameters analytic = zero_parameters(shape);
  evaluate_objective(params, ctx, cfg, batch, &analytic);
  if (corrupt) corrupt(analytic);

  std::vector<const Mat*> grads;
  analytic.visit([&](const std::string&, const std::string&, const Mat& g) { grads.push_back(&g); });

  struct Acc {
    double diff = 0, n = 0, max_abs = 0;
    std::size_t count = 0;
  };
  std::map<std::string, Acc> acc;
  std::vector<std::string> order;
  std::size_t index = 0;
  params.visit([&](const std::string&, const std::string& group, Mat& m) {
    const Mat& g = *grads[index++];
    if (!acc.contains(group)) order.push_back(group);
    auto& a = acc[group];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = evaluate_objective(params, ctx, cfg, batch).total;
      m.data()[i] = saved - h;
      const double down = evaluate_objective(params, ctx, cfg, batch).total;
      m.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double an = g.data()[i];
      a.diff += (an - numeric) * (an - numeric);
      a.n += numeric * numeric;
      a.max_abs = std::max(a.max_abs, std::abs(an - numeric));
      ++a.count;
    }
  });

  GradCheckReport report;
  for (const auto& group : order) {
    const auto& a = acc[group];
    // Relative to the finite-difference oracle; absolute below 1e-8.
    const double scale = std::sqrt(a.n);
    const double diff = std::sqrt(a.diff);
    GroupError e{group, a.count, scale < 1e-8 ? diff : diff / scale, a.max_abs};
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.num_scalars += a.count;
    report.groups.push_back(e);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Grid search

std::vector<GridRow> grid_search(const TemporalHeterogeneousNetwork& thn, const EvalSplit& split,
                                 const std::vector<TrainConfig>& cells, int jobs,
                                 std::ostream* progress) {
  std::vector<GridRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      GridRow& row = rows[i];
      row.config = cells[i];
      try {
        const auto result = train(thn, split, cells[i]);
        if (result.numeric_failure) throw NumericError(*result.numeric_failure);
        row.val_ap = result.best.best_val_ap;
        row.best_epoch = result.best.epoch;
        for (const auto& rec : result.log) {
          if (rec.epoch == row.best_epoch) row.val_auc = rec.val_auc;
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      if (progress) {
        std::lock_guard lock(log_mutex);
        *progress << "cell " << i + 1 << "/" << cells.size() << ": "
                  << (row.error ? "failed: " + *row.error : "val_ap=" + std::to_string(row.val_ap))
                  << '\n';
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
    if (a.val_ap != b.val_ap) return a.val_ap > b.val_ap;
    if (a.config.hp.dim != b.config.hp.dim) return a.config.hp.dim < b.config.hp.dim;
    return a.config.hp.heads < b.config.hp.heads;
  });
  return rows;
}

}  // namespace clp

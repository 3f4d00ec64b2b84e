#include "clp/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace clp {

std::size_t ScoredLinks::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

double link_score(const Mat& embeddings, NodeIndex a, NodeIndex b) {
  return sigmoid(embeddings.row(a).dot(embeddings.row(b)));
}

ScoredLinks score_links(const Mat& embeddings, std::span<const NodePair> positives,
                        std::span<const NodePair> negatives) {
  ScoredLinks out;
  const auto rows = embeddings.rows();
  auto add = [&](const NodePair& p, char label) {
    if (p.first < 0 || p.second < 0 || p.first >= rows || p.second >= rows) {
      throw LookupError("no embedding for pair (" + std::to_string(p.first) + ", " +
                        std::to_string(p.second) + ")");
    }
    out.pairs.push_back(p);
    out.scores.push_back(link_score(embeddings, p.first, p.second));
    out.labels.push_back(label);
  };
  for (const auto& p : positives) add(p, 1);
  for (const auto& p : negatives) add(p, 0);
  return out;
}

double auc(const ScoredLinks& s) {
  const std::size_t pos = s.positives();
  const std::size_t neg = s.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC needs both positives and negatives");

  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Count wins of positives over lower-scored negatives, half for ties.
  double twice_wins = 0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0, group_neg = 0;
    while (j < order.size() && s.scores[order[j]] == s.scores[order[i]]) {
      (s.labels[order[j]] ? group_pos : group_neg) += 1;
      ++j;
    }
    twice_wins += 2.0 * static_cast<double>(group_pos) * static_cast<double>(neg_below) +
                  static_cast<double>(group_pos) * static_cast<double>(group_neg);
    neg_below += group_neg;
    i = j;
  }
  return twice_wins / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

namespace {

std::vector<std::size_t> ranking(const ScoredLinks& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.scores[a] != s.scores[b]) return s.scores[a] > s.scores[b];
    return s.pairs[a] < s.pairs[b];
  });
  return order;
}

}  // namespace

double average_precision(const ScoredLinks& s) {
  const std::size_t pos = s.positives();
  if (pos == 0) throw UndefinedMetricError("AP needs at least one positive");
  const auto order = ranking(s);
  // Extended precision keeps small rational cases correctly rounded.
  long double total = 0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!s.labels[order[rank]]) continue;
    ++hits;
    total += static_cast<long double>(hits) / static_cast<long double>(rank + 1);
  }
  return static_cast<double>(total / static_cast<long double>(pos));
}

LinkMetrics evaluate_links(const Mat& embeddings, std::span<const NodePair> positives,
                           std::span<const NodePair> negatives) {
  const auto scored = score_links(embeddings, positives, negatives);
  return {auc(scored), average_precision(scored), scored.positives(), scored.negatives()};
}

void write_curves(const std::filesystem::path& file, const ScoredLinks& s) {
  const std::size_t pos = s.positives();
  const std::size_t neg = s.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("curves need both positives and negatives");
  std::ofstream out(file);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out.precision(17);
  out << "threshold,tpr,fpr,precision,recall\n";
  const auto order = ranking(s);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = s.scores[order[i]];
    while (i < order.size() && s.scores[order[i]] == threshold) {
      (s.labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    out << threshold << ',' << tpr << ',' << static_cast<double>(fp) / static_cast<double>(neg)
        << ',' << static_cast<double>(tp) / static_cast<double>(tp + fp) << ',' << tpr << '\n';
  }
}

}  // namespace clp

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "clp/common.hpp"

namespace clp {

struct ScoredLinks {
  std::vector<NodePair> pairs;
  std::vector<double> scores;  // logistic(u_a . u_b)
  std::vector<char> labels;    // 1 = positive

  std::size_t size() const { return pairs.size(); }
  std::size_t positives() const;
  std::size_t negatives() const { return size() - positives(); }
};

ScoredLinks score_links(const Mat& embeddings, std::span<const NodePair> positives,
                        std::span<const NodePair> negatives);

double link_score(const Mat& embeddings, NodeIndex a, NodeIndex b);

// Mann-Whitney statistic with ties counted one half.
double auc(const ScoredLinks& scored);

// Mean precision at the rank of each positive, ranks by descending score
// with ties broken by ascending pair.
double average_precision(const ScoredLinks& scored);

struct LinkMetrics {
  double auc = 0;
  double ap = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

LinkMetrics evaluate_links(const Mat& embeddings, std::span<const NodePair> positives,
                           std::span<const NodePair> negatives);

// threshold,tpr,fpr,precision,recall at every distinct score.
void write_curves(const std::filesystem::path& file, const ScoredLinks& scored);

}  // namespace clp

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"

using namespace clp;
using clp::testing::random_mat;
using clp::testing::random_node_params;
using clp::testing::typed;

namespace {

double lrelu(double x) { return x > 0 ? x : 0.2 * x; }
double elu(double x) { return x > 0 ? x : std::expm1(x); }

// Plain-loop reference of the attention view for one node.
std::vector<double> reference_u(const TypedSubgraph& sub, const Mat& X, const NodeLevelParams& p,
                                std::size_t a) {
  const auto d = static_cast<int>(X.cols());
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  auto wx = [&](int k, NodeIndex v, int i) {
    double s = 0;
    for (int j = 0; j < d; ++j) s += p.W[static_cast<std::size_t>(k)](i, j) * X(v, j);
    return s;
  };
  for (int k = 0; k < p.heads(); ++k) {
    const auto& A = p.A[static_cast<std::size_t>(k)];
    const NodeIndex ga = sub.nodes[a];
    std::vector<double> beta;
    for (auto b : sub.neighbors_of(a)) {
      const NodeIndex gb = sub.nodes[static_cast<std::size_t>(b)];
      double s = 0;
      for (int i = 0; i < d; ++i) s += A(0, i) * wx(k, ga, i) + A(0, d + i) * wx(k, gb, i);
      beta.push_back(lrelu(s));
    }
    double z = 0;
    for (double b : beta) z += std::exp(b);
    for (int i = 0; i < d; ++i) {
      double m = 0;
      std::size_t j = 0;
      for (auto b : sub.neighbors_of(a)) {
        m += std::exp(beta[j++]) / z * wx(k, sub.nodes[static_cast<std::size_t>(b)], i);
      }
      out[static_cast<std::size_t>(i)] += elu(m) / p.heads();
    }
  }
  return out;
}

NodeLevelParams single_head(Mat W, Mat A) {
  NodeLevelParams p;
  p.W.push_back(std::move(W));
  p.A.push_back(std::move(A));
  return p;
}

Mat rows_of(std::initializer_list<std::initializer_list<double>> values) {
  Mat m(static_cast<Eigen::Index>(values.size()),
        static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : values) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("attention_weights: self-loop only and uniform under zero W") {
  const auto lone = typed({{0, 0, 0}});
  Rng rng(1);
  const Mat X = random_mat(1, 3, rng);
  CHECK(attention_weights(lone, X, random_node_params(3, 1, rng), 0)[0] == doctest::Approx(1.0));

  const auto path = typed({{0, 1, 0}, {1, 2, 0}});
  NodeLevelParams zero = single_head(Mat::Zero(3, 3), random_mat(1, 6, rng));
  const auto alpha = attention_weights(path, random_mat(3, 3, rng), zero, 0);
  const auto nb = path.neighbors_of(1);
  for (std::size_t j = 0; j < nb.size(); ++j) {
    CHECK(alpha[static_cast<std::size_t>(path.offsets[1]) + j] == doctest::Approx(1.0 / 3));
  }
}

TEST_CASE("attention_weights: hand-evaluated 3-node path") {
  const auto path = typed({{0, 1, 0}, {1, 2, 0}});
  const Mat X = rows_of({{1, 0}, {0, 1}, {1, 1}});
  const auto p = single_head(rows_of({{1, 0}, {0, 2}}), rows_of({{0.5, -1, 1, 0.25}}));
  // Middle node: W x = (1,0), (0,2), (1,2); source half 0.5*0 - 1*2 = -2;
  // target halves 1, 0.5, 1.5; LeakyReLU(-1, -1.5, -0.5) = (-0.2, -0.3, -0.1).
  const double z = std::exp(-0.2) + std::exp(-0.3) + std::exp(-0.1);
  const auto alpha = attention_weights(path, X, p, 0);
  const auto base = static_cast<std::size_t>(path.offsets[1]);
  CHECK(alpha[base + 0] == doctest::Approx(std::exp(-0.2) / z).epsilon(1e-12));
  CHECK(alpha[base + 1] == doctest::Approx(std::exp(-0.3) / z).epsilon(1e-12));
  CHECK(alpha[base + 2] == doctest::Approx(std::exp(-0.1) / z).epsilon(1e-12));

  // End node 0: W x0 = (1,0), source half 0.5; targets 1 (self), 0.5 (node 1).
  const double e0 = std::exp(1.5), e1 = std::exp(1.0);
  CHECK(alpha[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));

  // u of the middle node: ELU of the weighted W x_b.
  const Mat U = gat_aggregate(path, X, p);
  const double m0 = (std::exp(-0.2) * 1 + std::exp(-0.1) * 1) / z;
  const double m1 = (std::exp(-0.3) * 2 + std::exp(-0.1) * 2) / z;
  CHECK(U(1, 0) == doctest::Approx(m0).epsilon(1e-12));
  CHECK(U(1, 1) == doctest::Approx(m1).epsilon(1e-12));
}

TEST_CASE("gat_aggregate: zero features, single self-loop, two-head star") {
  Rng rng(2);
  const auto star = typed({{0, 1, 0}, {0, 2, 0}});
  const auto p = random_node_params(2, 2, rng);
  CHECK(gat_aggregate(star, Mat::Zero(3, 2), p).isZero(0));

  const auto lone = typed({{0, 0, 0}});
  const Mat x = rows_of({{-0.7, 0.4}});
  const Mat u = gat_aggregate(lone, x, single_head(rows_of({{1, 2}, {0, 1}}), Mat::Zero(1, 4)));
  CHECK(u(0, 0) == doctest::Approx(elu(-0.7 + 0.8)));
  CHECK(u(0, 1) == doctest::Approx(elu(0.4)));

  // Star with two distinct heads: mean of two per-head oracles.
  const Mat X = random_mat(3, 2, rng);
  const Mat U = gat_aggregate(star, X, p);
  for (std::size_t a = 0; a < 3; ++a) {
    const auto ref = reference_u(star, X, p, a);
    CHECK(U(static_cast<Eigen::Index>(a), 0) == doctest::Approx(ref[0]).epsilon(1e-12));
    CHECK(U(static_cast<Eigen::Index>(a), 1) == doctest::Approx(ref[1]).epsilon(1e-12));
  }
}

TEST_CASE("gat_aggregate: matches the loop reference on random graphs") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sub = typed(clp::testing::random_edges(9, 0.3, rng));
    const Mat X = random_mat(9, 4, rng);
    const auto p = random_node_params(4, 3, rng);
    const Mat U = gat_aggregate(sub, X, p);
    for (std::size_t a = 0; a < sub.size(); ++a) {
      const auto ref = reference_u(sub, X, p, a);
      for (int i = 0; i < 4; ++i) {
        CHECK(U(static_cast<Eigen::Index>(a), i) ==
              doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("gat_aggregate: zero parameters give zero output") {
  Rng rng(4);
  const auto sub = typed(clp::testing::random_edges(8, 0.4, rng));
  NodeLevelParams zero;
  zero.W.assign(2, Mat::Zero(3, 3));
  zero.A.assign(2, Mat::Zero(1, 6));
  CHECK(gat_aggregate(sub, random_mat(8, 3, rng), zero).isZero(0));
}

TEST_CASE("mean_aggregate: isolated, single edge, 1/sqrt(6) coefficient") {
  Rng rng(5);
  const Mat W = random_mat(2, 2, rng);
  const auto p = single_head(W, Mat::Zero(1, 4));

  const auto lone = typed({{0, 0, 0}});
  const Mat x = random_mat(1, 2, rng);
  CHECK((mean_aggregate(lone, x, p) - x * W.transpose()).norm() < 1e-14);

  const auto pair = typed({{0, 1, 0}});
  const Mat X = random_mat(2, 2, rng);
  const Mat H = mean_aggregate(pair, X, p);
  CHECK((H.row(0) - (X.row(0) + X.row(1)) * W.transpose()).norm() < 1e-14);

  // a=0 has neighbours {1, 2}; b=1 has neighbours {0, 3, 4}.
  const auto g = typed({{0, 1, 0}, {0, 2, 0}, {1, 3, 0}, {1, 4, 0}});
  Mat Xb = Mat::Zero(5, 2);
  Xb(1, 0) = 1;
  const Mat Hb = mean_aggregate(g, Xb, single_head(Mat::Identity(2, 2), Mat::Zero(1, 4)));
  CHECK(Hb(0, 0) == doctest::Approx(1 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(Hb(0, 0) == doctest::Approx(0.40825).epsilon(1e-5));
  CHECK(Hb(0, 1) == 0.0);
}

TEST_CASE("mean_aggregate: uses the head-mean W") {
  const auto lone = typed({{0, 0, 0}});
  NodeLevelParams p;
  p.W = {rows_of({{2, 0}, {0, 0}}), rows_of({{0, 0}, {0, 4}})};
  p.A = {Mat::Zero(1, 4), Mat::Zero(1, 4)};
  const Mat H = mean_aggregate(lone, rows_of({{1, 1}}), p);
  CHECK(H(0, 0) == doctest::Approx(1.0));
  CHECK(H(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("node_infonce: hand cases") {
  const auto lone = typed({{0, 0, 0}});
  const auto t0 = node_infonce(rows_of({{0.3, 2}}), rows_of({{1, -1}}), lone, 0.5);
  CHECK(t0.pos == doctest::Approx(0.0));
  CHECK(t0.neg == 0.0);

  // u_a.h_a = 1, u_a.h_b = 0, u_b = 0.
  const auto pair = typed({{0, 1, 0}});
  const Mat U = rows_of({{1, 0}, {0, 0}});
  const Mat H = rows_of({{1, 0}, {0, 1}});
  const auto t = node_infonce(U, H, pair, 1.0);
  const double a_pos = -std::log(std::exp(1.0) / (std::exp(1.0) + 1));
  CHECK(a_pos == doctest::Approx(0.3133).epsilon(1e-4));
  CHECK(t.pos == doctest::Approx(a_pos + std::log(2.0)).epsilon(1e-12));
  CHECK(t.neg == doctest::Approx(std::log(std::exp(1.0) + 1) + std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(node_infonce(U, H, pair, 0.0), ParameterError);
  CHECK_THROWS_AS(node_infonce(U, H, pair, -1.0), ParameterError);
}

TEST_CASE("node_infonce: positive term falls as the anchor's own similarity grows") {
  const auto pair = typed({{0, 1, 0}});
  Mat U = rows_of({{1, 0}, {0, 0}});
  double last = 1e9;
  for (double s : {0.0, 0.5, 1.0, 2.0}) {
    const Mat H = rows_of({{s, 0}, {0, 1}});
    const double pos = node_infonce(U, H, pair, 1.0).pos;
    CHECK(pos < last);
    last = pos;
  }
}

TEST_CASE("node_infonce: non-negative on random inputs") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sub = typed(clp::testing::random_edges(7, 0.4, rng));
    const auto t = node_infonce(random_mat(7, 3, rng, 2), random_mat(7, 3, rng, 2), sub, 0.3);
    CHECK(t.pos >= 0);
    CHECK(t.neg >= 0);
  }
}

namespace {

struct TwoTypeFixture {
  std::vector<TypedSubgraph> subs;
  SnapshotLayout layout;
};

TwoTypeFixture two_types(std::vector<SnapshotEdge> edges) {
  TwoTypeFixture f;
  f.subs = build_typed_subgraphs(clp::testing::snapshot(std::move(edges)), 2);
  f.layout = build_snapshot_layout(f.subs);
  return f;
}

}  // namespace

TEST_CASE("edge_type_weights: single type, zero z, hand softmax") {
  Rng rng(7);
  const Mat W = random_mat(2, 2, rng), b = random_mat(1, 2, rng);

  // Node 2 takes part in type 0 only.
  auto f = two_types({{0, 1, 0}, {0, 1, 1}, {1, 2, 0}});
  std::vector<Mat> U = {random_mat(3, 2, rng), random_mat(2, 2, rng)};
  const Mat z = random_mat(1, 2, rng);
  const auto w = edge_type_weights(f.layout, U, {W, b, z});
  const auto n2 = f.layout.local_of(2);
  const auto s2 = static_cast<std::size_t>(f.layout.slot_offsets[static_cast<std::size_t>(n2)]);
  CHECK(f.layout.slot_offsets[static_cast<std::size_t>(n2) + 1] - static_cast<int>(s2) == 1);
  CHECK(w.delta[s2] == doctest::Approx(1.0));

  const Mat zero = Mat::Zero(1, 2);
  const auto u = edge_type_weights(f.layout, U, {W, b, zero});
  CHECK(u.delta[0] == doctest::Approx(0.5));
  CHECK(u.delta[1] == doctest::Approx(0.5));

  // gamma = 2 tanh(u_0): u_0 = atanh(1/2) gives 1, u_0 = 0 gives 0.
  const Mat I = Mat::Identity(2, 2), b0 = Mat::Zero(1, 2);
  const Mat z2 = rows_of({{2, 0}});
  std::vector<Mat> V = {Mat::Zero(3, 2), Mat::Zero(2, 2)};
  V[0](0, 0) = std::atanh(0.5);
  const auto h = edge_type_weights(f.layout, V, {I, b0, z2});
  CHECK(h.gamma[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.gamma[1] == doctest::Approx(0.0));
  CHECK(h.delta[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1)).epsilon(1e-12));
  CHECK(h.delta[1] == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("edge_fuse: one type, identical inputs, weighted sum") {
  Rng rng(8);
  auto f = two_types({{0, 1, 0}, {0, 1, 1}});
  const Mat v1 = random_mat(2, 3, rng), v2 = random_mat(2, 3, rng);
  const std::vector<Mat> U = {v1, v2};
  const std::vector<double> delta = {0.25, 0.75, 0.25, 0.75};
  const Mat fused = edge_fuse(f.layout, U, delta);
  CHECK((fused - (0.25 * v1 + 0.75 * v2)).norm() < 1e-14);

  const std::vector<Mat> same = {v1, v1};
  CHECK((edge_fuse(f.layout, same, std::vector<double>{0.1, 0.9, 0.6, 0.4}) - v1).norm() < 1e-14);

  auto one = two_types({{0, 1, 0}});
  const std::vector<Mat> only = {v1, Mat(0, 3)};
  CHECK((edge_fuse(one.layout, only, std::vector<double>{1.0, 1.0}) - v1).norm() < 1e-14);
}

TEST_CASE("edge_fuse: convexity per coordinate") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto f = two_types(clp::testing::random_edges(8, 0.4, rng, 2));
    std::vector<Mat> U;
    for (const auto& s : f.subs) U.push_back(random_mat(static_cast<Eigen::Index>(s.size()), 3, rng));
    const Mat W = random_mat(3, 3, rng), b = random_mat(1, 3, rng), z = random_mat(1, 3, rng, 3);
    const auto w = edge_type_weights(f.layout, U, {W, b, z});
    const Mat fused = edge_fuse(f.layout, U, w.delta);
    for (std::size_t a = 0; a < f.layout.size(); ++a) {
      for (int i = 0; i < 3; ++i) {
        double lo = 1e9, hi = -1e9;
        for (auto s = f.layout.slot_offsets[a]; s < f.layout.slot_offsets[a + 1]; ++s) {
          const auto us = static_cast<std::size_t>(s);
          const double v = U[static_cast<std::size_t>(f.layout.slot_type[us])](f.layout.slot_local[us], i);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        const double x = fused(static_cast<Eigen::Index>(a), i);
        CHECK(x >= lo - 1e-12);
        CHECK(x <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("edge_mean_aggregate: isolated, single edge, two-type oracle") {
  Rng rng(10);
  auto lone = two_types({{0, 0, 0}});
  const Mat u = random_mat(1, 2, rng);
  const std::vector<Mat> one = {u, Mat(0, 2)};
  CHECK((edge_mean_aggregate(lone.layout, lone.subs, one) - u).norm() < 1e-14);

  auto pair = two_types({{0, 1, 0}});
  const Mat U = random_mat(2, 2, rng);
  const std::vector<Mat> pu = {U, Mat(0, 2)};
  const Mat H = edge_mean_aggregate(pair.layout, pair.subs, pu);
  CHECK((H.row(0) - (U.row(0) + U.row(1))).norm() < 1e-14);

  // Type 0: 0-1, 1-2, 2-3. Type 1: 0-2, 0-3.
  auto f = two_types({{0, 1, 0}, {1, 2, 0}, {2, 3, 0}, {0, 2, 1}, {0, 3, 1}});
  const std::vector<Mat> tu = {random_mat(4, 2, rng), random_mat(3, 2, rng)};
  const Mat Hf = edge_mean_aggregate(f.layout, f.subs, tu);
  const auto& A = tu[0];  // rows: nodes 0..3
  const auto& B = tu[1];  // rows: nodes 0, 2, 3
  // Node 0: type 0 degree 1 (nbr 1 degree 2); type 1 degree 2 (nbrs 2, 3 each degree 1).
  const RowVec h0 = 0.5 * ((A.row(0) + A.row(1) / std::sqrt(2.0)) +
                           (B.row(0) + B.row(1) / std::sqrt(2.0) + B.row(2) / std::sqrt(2.0)));
  CHECK((Hf.row(f.layout.local_of(0)) - h0).norm() < 1e-14);
  // Node 1: type 0 only, degree 2, nbrs 0 (degree 1) and 2 (degree 2).
  const RowVec h1 = A.row(1) + A.row(0) / std::sqrt(2.0) + A.row(2) / 2.0;
  CHECK((Hf.row(f.layout.local_of(1)) - h1).norm() < 1e-14);
}

TEST_CASE("edge_infonce: singleton, hand value, self-pair exclusion") {
  auto lone = two_types({{0, 0, 1}});
  const auto t0 = edge_infonce(rows_of({{1, 2}}), rows_of({{3, 1}}), lone.layout, 1.0);
  CHECK(t0.pos == doctest::Approx(0.0));
  CHECK(t0.neg == 0.0);

  // Neighbourhood {a, b} through the union of two types.
  auto f = two_types({{0, 1, 1}});
  const Mat U = rows_of({{1, 0}, {0, 0}});
  const Mat H = rows_of({{1, 0}, {0, 1}});
  const auto t = edge_infonce(U, H, f.layout, 1.0);
  CHECK(t.pos - std::log(2.0) == doctest::Approx(0.3133).epsilon(1e-4));
  CHECK_THROWS_AS(edge_infonce(U, H, f.layout, 0.0), ParameterError);

  // Only u_a . u_a changes: numerator terms unaffected, denominators include a.
  // With the anchor's u scaled the b != a terms change, so instead vary u_b only
  // along a direction orthogonal to u_a: u_a . u_b and u_a . u_a stay fixed.
  const Mat U2 = rows_of({{1, 0}, {0, 5}});
  const double neg_a = edge_infonce(U, H, f.layout, 1.0).neg - std::log(2.0);
  const double neg_a2 = edge_infonce(U2, H, f.layout, 1.0).neg;
  // node b's term: u_b.u_a = 0, u_b.u_b = 25 -> LSE(0, 25) - 0.
  CHECK(neg_a2 - (std::log(1 + std::exp(25.0))) == doctest::Approx(neg_a).epsilon(1e-12));
}

TEST_CASE("normalisation: attention and type weights sum to one") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = two_types(clp::testing::random_edges(10, 0.3, rng, 2));
    const auto X = random_mat(10, 4, rng);
    std::vector<Mat> U;
    for (const auto& s : f.subs) {
      const auto p = random_node_params(4, 2, rng);
      for (int k = 0; k < 2; ++k) {
        const auto alpha = attention_weights(s, X, p, k);
        for (std::size_t a = 0; a < s.size(); ++a) {
          double sum = 0;
          for (auto j = s.offsets[a]; j < s.offsets[a + 1]; ++j) sum += alpha[static_cast<std::size_t>(j)];
          CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
      }
      U.push_back(gat_aggregate(s, X, p));
    }
    const Mat W = random_mat(4, 4, rng), b = random_mat(1, 4, rng), z = random_mat(1, 4, rng, 2);
    const auto w = edge_type_weights(f.layout, U, {W, b, z});
    for (std::size_t a = 0; a < f.layout.size(); ++a) {
      double sum = 0;
      for (auto s = f.layout.slot_offsets[a]; s < f.layout.slot_offsets[a + 1]; ++s) {
        sum += w.delta[static_cast<std::size_t>(s)];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

namespace {

// Node- and edge-level contrastive totals for one snapshot.
std::array<double, 4> snapshot_losses(const std::vector<SnapshotEdge>& edges, const Mat& X,
                                      const std::vector<NodeLevelParams>& p, const Mat& W,
                                      const Mat& b, const Mat& z) {
  auto f = two_types(edges);
  std::array<double, 4> out{};
  std::vector<Mat> U;
  for (std::size_t r = 0; r < 2; ++r) {
    const auto& s = f.subs[r];
    if (s.empty()) {
      U.emplace_back(0, X.cols());
      continue;
    }
    U.push_back(gat_aggregate(s, X, p[r]));
    const auto t = node_infonce(U.back(), mean_aggregate(s, X, p[r]), s, 0.5);
    out[0] += t.pos;
    out[1] += t.neg;
  }
  const auto w = edge_type_weights(f.layout, U, {W, b, z});
  const auto t = edge_infonce(edge_fuse(f.layout, U, w.delta),
                              edge_mean_aggregate(f.layout, f.subs, U), f.layout, 0.5);
  out[2] = t.pos;
  out[3] = t.neg;
  return out;
}

}  // namespace

TEST_CASE("permutation invariance of the spatial losses") {
  Rng rng(12);
  const int n = 9;
  const auto edges = clp::testing::random_edges(n, 0.35, rng, 2);
  const Mat X = random_mat(n, 3, rng);
  const std::vector<NodeLevelParams> p = {random_node_params(3, 2, rng), random_node_params(3, 2, rng)};
  const Mat W = random_mat(3, 3, rng), b = random_mat(1, 3, rng), z = random_mat(1, 3, rng);

  std::vector<NodeIndex> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<SnapshotEdge> moved;
  for (const auto& e : edges) moved.push_back({perm[static_cast<std::size_t>(e.src)], perm[static_cast<std::size_t>(e.dst)], e.type});
  Mat Xp(n, 3);
  for (int v = 0; v < n; ++v) Xp.row(perm[static_cast<std::size_t>(v)]) = X.row(v);

  const auto a = snapshot_losses(edges, X, p, W, b, z);
  const auto c = snapshot_losses(moved, Xp, p, W, b, z);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a[i] - c[i]) < 1e-9);
}

TEST_CASE("node-level gradients of L+ - L- match finite differences") {
  Rng rng(13);
  const auto sub = typed(clp::testing::random_edges(12, 0.3, rng));
  Mat X = random_mat(12, 3, rng);
  auto p = random_node_params(3, 2, rng);
  const double tau = 0.7;

  auto loss = [&] {
    const auto c = node_level_forward(sub, X, p);
    const auto t = node_infonce(c.U, c.H, sub, tau);
    return t.pos - t.neg;
  };

  const auto cache = node_level_forward(sub, X, p);
  Mat gU = Mat::Zero(cache.U.rows(), 3), gH = Mat::Zero(cache.H.rows(), 3);
  neighborhood_infonce_backward(cache.U, cache.H, neighborhood(sub), tau, 1.0, -1.0, gU, gH);
  Mat gX = Mat::Zero(12, 3);
  NodeLevelParams gp;
  gp.W.assign(2, Mat::Zero(3, 3));
  gp.A.assign(2, Mat::Zero(1, 6));
  node_level_backward(sub, p, cache, gU, gH, gX, gp);

  auto check = [&](Mat& param, const Mat& grad) {
    double diff = 0, scale = 0;
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double saved = param.data()[i];
      param.data()[i] = saved + 1e-5;
      const double up = loss();
      param.data()[i] = saved - 1e-5;
      const double down = loss();
      param.data()[i] = saved;
      const double num = (up - down) / 2e-5;
      diff += (num - grad.data()[i]) * (num - grad.data()[i]);
      scale = std::max(scale, std::max(num * num, grad.data()[i] * grad.data()[i]));
    }
    CHECK(std::sqrt(diff) / std::max(std::sqrt(scale), 1e-8) < 1e-4);
  };
  check(X, gX);
  for (int k = 0; k < 2; ++k) {
    check(p.W[static_cast<std::size_t>(k)], gp.W[static_cast<std::size_t>(k)]);
    check(p.A[static_cast<std::size_t>(k)], gp.A[static_cast<std::size_t>(k)]);
  }
}

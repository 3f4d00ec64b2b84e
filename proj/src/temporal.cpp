#include "clp/temporal.hpp"

#include <algorithm>
#include <cmath>

namespace clp {

namespace {

Mat affine(const Mat& x, const Mat& W, const Mat& h, const Mat& U, const Mat& b) {
  Mat out = x * W.transpose() + h * U.transpose();
  out.rowwise() += b.row(0);
  return out;
}

Mat logistic(const Mat& m) { return m.unaryExpr([](double v) { return sigmoid(v); }); }
Mat tanh_of(const Mat& m) { return m.array().tanh().matrix(); }

// (1 - s) * s for a logistic output s.
Mat logistic_grad(const Mat& s) { return (s.array() * (1.0 - s.array())).matrix(); }
Mat tanh_grad(const Mat& t) { return (1.0 - t.array().square()).matrix(); }

void accumulate_gate(const Mat& grad_pre, const Mat& x, const Mat& h, Mat& gW, Mat& gU, Mat& gb) {
  gW += grad_pre.transpose() * x;
  gU += grad_pre.transpose() * h;
  gb += grad_pre.colwise().sum();
}

void check_steps(std::span<const Mat> steps) {
  if (steps.empty()) throw ParameterError("recurrent encoder needs at least one step");
}

constexpr Eigen::Index kBlockRows = 256;

}  // namespace

LstmParams zero_lstm(int d) {
  const Mat W = Mat::Zero(d, d);
  const Mat b = Mat::Zero(1, d);
  return {W, W, b, W, W, b, W, W, b, W, W, b};
}

GruParams zero_gru(int d) {
  const Mat W = Mat::Zero(d, d);
  const Mat b = Mat::Zero(1, d);
  return {W, W, b, W, W, b, W, W, b};
}

LstmCache lstm_forward(std::span<const Mat> steps, const LstmParams& p) {
  check_steps(steps);
  LstmCache c;
  const auto n = steps.front().rows();
  const auto d = p.Wi.rows();
  Mat h = Mat::Zero(n, d);
  Mat cell = Mat::Zero(n, d);
  for (const Mat& x : steps) {
    c.x.push_back(x);
    c.h_prev.push_back(h);
    c.c_prev.push_back(cell);
    c.i.push_back(logistic(affine(x, p.Wi, h, p.Ui, p.bi)));
    c.f.push_back(logistic(affine(x, p.Wf, h, p.Uf, p.bf)));
    c.g.push_back(tanh_of(affine(x, p.Wg, h, p.Ug, p.bg)));
    c.o.push_back(logistic(affine(x, p.Wo, h, p.Uo, p.bo)));
    cell = c.f.back().cwiseProduct(cell) + c.i.back().cwiseProduct(c.g.back());
    c.tanh_c.push_back(tanh_of(cell));
    h = c.o.back().cwiseProduct(c.tanh_c.back());
  }
  c.h = std::move(h);
  return c;
}

std::vector<Mat> lstm_backward(const LstmCache& c, const LstmParams& p, const Mat& grad_h,
                               LstmParams& grad) {
  const std::size_t steps = c.x.size();
  std::vector<Mat> grad_x(steps);
  Mat gh = grad_h;
  Mat gc = Mat::Zero(gh.rows(), gh.cols());
  for (std::size_t s = steps; s-- > 0;) {
    const Mat go = gh.cwiseProduct(c.tanh_c[s]);
    const Mat gcell = gc + gh.cwiseProduct(c.o[s]).cwiseProduct(tanh_grad(c.tanh_c[s]));
    const Mat ai = gcell.cwiseProduct(c.g[s]).cwiseProduct(logistic_grad(c.i[s]));
    const Mat af = gcell.cwiseProduct(c.c_prev[s]).cwiseProduct(logistic_grad(c.f[s]));
    const Mat ag = gcell.cwiseProduct(c.i[s]).cwiseProduct(tanh_grad(c.g[s]));
    const Mat ao = go.cwiseProduct(logistic_grad(c.o[s]));
    accumulate_gate(ai, c.x[s], c.h_prev[s], grad.Wi, grad.Ui, grad.bi);
    accumulate_gate(af, c.x[s], c.h_prev[s], grad.Wf, grad.Uf, grad.bf);
    accumulate_gate(ag, c.x[s], c.h_prev[s], grad.Wg, grad.Ug, grad.bg);
    accumulate_gate(ao, c.x[s], c.h_prev[s], grad.Wo, grad.Uo, grad.bo);
    grad_x[s] = ai * p.Wi + af * p.Wf + ag * p.Wg + ao * p.Wo;
    gh = ai * p.Ui + af * p.Uf + ag * p.Ug + ao * p.Uo;
    gc = gcell.cwiseProduct(c.f[s]);
  }
  return grad_x;
}

GruCache gru_forward(std::span<const Mat> steps, const GruParams& p) {
  check_steps(steps);
  GruCache c;
  const auto n = steps.front().rows();
  const auto d = p.Wz.rows();
  Mat h = Mat::Zero(n, d);
  for (const Mat& x : steps) {
    c.x.push_back(x);
    c.h_prev.push_back(h);
    c.z.push_back(logistic(affine(x, p.Wz, h, p.Uz, p.bz)));
    c.r.push_back(logistic(affine(x, p.Wr, h, p.Ur, p.br)));
    c.n.push_back(tanh_of(affine(x, p.Wn, c.r.back().cwiseProduct(h), p.Un, p.bn)));
    const Mat& z = c.z.back();
    h = (1.0 - z.array()).matrix().cwiseProduct(c.n.back()) + z.cwiseProduct(h);
  }
  c.h = std::move(h);
  return c;
}

std::vector<Mat> gru_backward(const GruCache& c, const GruParams& p, const Mat& grad_h,
                              GruParams& grad) {
  const std::size_t steps = c.x.size();
  std::vector<Mat> grad_x(steps);
  Mat gh = grad_h;
  for (std::size_t s = steps; s-- > 0;) {
    const Mat& hp = c.h_prev[s];
    const Mat& z = c.z[s];
    const Mat& r = c.r[s];
    const Mat& nn = c.n[s];
    const Mat gz = gh.cwiseProduct(hp - nn);
    const Mat an = gh.cwiseProduct((1.0 - z.array()).matrix()).cwiseProduct(tanh_grad(nn));
    const Mat rh = r.cwiseProduct(hp);
    accumulate_gate(an, c.x[s], rh, grad.Wn, grad.Un, grad.bn);
    const Mat grad_rh = an * p.Un;
    const Mat ar = grad_rh.cwiseProduct(hp).cwiseProduct(logistic_grad(r));
    const Mat az = gz.cwiseProduct(logistic_grad(z));
    accumulate_gate(az, c.x[s], hp, grad.Wz, grad.Uz, grad.bz);
    accumulate_gate(ar, c.x[s], hp, grad.Wr, grad.Ur, grad.br);
    grad_x[s] = az * p.Wz + ar * p.Wr + an * p.Wn;
    gh = gh.cwiseProduct(z) + grad_rh.cwiseProduct(r) + az * p.Uz + ar * p.Ur;
  }
  return grad_x;
}

namespace {

// sum_a [ LSE_{b != a}(anchor_a . other_b / tau) - anchor_a . positive_a / tau ]
double contrast_rows(const Mat& anchor, const Mat& positive, double tau) {
  const auto m = anchor.rows();
  double total = 0;
  for (Eigen::Index start = 0; start < m; start += kBlockRows) {
    const auto rows = std::min(kBlockRows, m - start);
    Mat sims = anchor.middleRows(start, rows) * anchor.transpose() / tau;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto a = start + i;
      sims(i, a) = -std::numeric_limits<double>::infinity();
      const double top = sims.row(i).maxCoeff();
      const double lse = top + std::log((sims.row(i).array() - top).exp().sum());
      total += lse - anchor.row(a).dot(positive.row(a)) / tau;
    }
  }
  return total;
}

void contrast_rows_backward(const Mat& anchor, const Mat& positive, double tau, double weight,
                            Mat& grad_anchor, Mat& grad_positive) {
  const auto m = anchor.rows();
  for (Eigen::Index start = 0; start < m; start += kBlockRows) {
    const auto rows = std::min(kBlockRows, m - start);
    Mat probs = anchor.middleRows(start, rows) * anchor.transpose() / tau;
    for (Eigen::Index i = 0; i < rows; ++i) {
      probs(i, start + i) = -std::numeric_limits<double>::infinity();
      const double top = probs.row(i).maxCoeff();
      probs.row(i) = (probs.row(i).array() - top).exp().matrix();
      probs.row(i) /= probs.row(i).sum();
    }
    const double c = weight / tau;
    grad_anchor.middleRows(start, rows) += c * (probs * anchor);
    grad_anchor += c * (probs.transpose() * anchor.middleRows(start, rows));
    grad_anchor.middleRows(start, rows) -= c * positive.middleRows(start, rows);
    grad_positive.middleRows(start, rows) -= c * anchor.middleRows(start, rows);
  }
}

}  // namespace

TimeTerms time_infonce(const Mat& UL, const Mat& US, std::span<const NodeIndex> nodes,
                       double tau, TimeLossSign sign) {
  if (!(tau > 0)) throw ParameterError("temperature must be positive");
  if (nodes.size() < 2) {
    throw InsufficientSpanError("time-level contrast needs at least 2 nodes in the last snapshot");
  }
  Mat L(static_cast<Eigen::Index>(nodes.size()), UL.cols());
  Mat S(L.rows(), US.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    L.row(static_cast<Eigen::Index>(i)) = UL.row(nodes[i]);
    S.row(static_cast<Eigen::Index>(i)) = US.row(nodes[i]);
  }
  const double s = sign == TimeLossSign::kStandard ? 1.0 : -1.0;
  return {s * contrast_rows(L, S, tau), s * contrast_rows(S, L, tau)};
}

void time_infonce_backward(const Mat& UL, const Mat& US, std::span<const NodeIndex> nodes,
                           double tau, TimeLossSign sign, double weight, Mat& grad_UL,
                           Mat& grad_US) {
  if (!(tau > 0)) throw ParameterError("temperature must be positive");
  if (nodes.size() < 2) {
    throw InsufficientSpanError("time-level contrast needs at least 2 nodes in the last snapshot");
  }
  const auto m = static_cast<Eigen::Index>(nodes.size());
  Mat L(m, UL.cols()), S(m, US.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    L.row(i) = UL.row(nodes[static_cast<std::size_t>(i)]);
    S.row(i) = US.row(nodes[static_cast<std::size_t>(i)]);
  }
  const double w = weight * (sign == TimeLossSign::kStandard ? 1.0 : -1.0);
  Mat gL = Mat::Zero(m, L.cols());
  Mat gS = Mat::Zero(m, S.cols());
  contrast_rows_backward(L, S, tau, w, gL, gS);
  contrast_rows_backward(S, L, tau, w, gS, gL);
  for (Eigen::Index i = 0; i < m; ++i) {
    grad_UL.row(nodes[static_cast<std::size_t>(i)]) += gL.row(i);
    grad_US.row(nodes[static_cast<std::size_t>(i)]) += gS.row(i);
  }
}

Mat fuse_final(const Mat& UL, const Mat& US) {
  if (UL.rows() != US.rows() || UL.cols() != US.cols()) {
    throw ParameterError("long- and short-term embeddings cover different node sets");
  }
  return (UL + US) / 2.0;
}

}  // namespace clp

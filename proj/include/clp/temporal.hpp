#pragma once

#include <span>
#include <vector>

#include "clp/common.hpp"

namespace clp {

// Gate order: input, forget, candidate, output. W* act on the input (d x d),
// U* on the previous hidden state (d x d), b* are 1 x d.
struct LstmParams {
  Mat Wi, Ui, bi;
  Mat Wf, Uf, bf;
  Mat Wg, Ug, bg;
  Mat Wo, Uo, bo;
};

// Gate order: update, reset, candidate. The candidate uses W x + U (r * h) + b.
struct GruParams {
  Mat Wz, Uz, bz;
  Mat Wr, Ur, br;
  Mat Wn, Un, bn;
};

LstmParams zero_lstm(int d);
GruParams zero_gru(int d);

// Each step input is an N x d matrix (one row per node; absent nodes are
// zero rows). The channel output is the final hidden state.
struct LstmCache {
  std::vector<Mat> x, h_prev, c_prev, i, f, g, o, tanh_c;
  Mat h;
};

struct GruCache {
  std::vector<Mat> x, h_prev, z, r, n;
  Mat h;
};

LstmCache lstm_forward(std::span<const Mat> steps, const LstmParams& p);
GruCache gru_forward(std::span<const Mat> steps, const GruParams& p);

inline Mat lstm_encode(std::span<const Mat> steps, const LstmParams& p) {
  return lstm_forward(steps, p).h;
}
inline Mat gru_encode(std::span<const Mat> steps, const GruParams& p) {
  return gru_forward(steps, p).h;
}

// Accumulates parameter gradients into `grad`; returns per-step input grads.
std::vector<Mat> lstm_backward(const LstmCache& cache, const LstmParams& p, const Mat& grad_h,
                               LstmParams& grad);
std::vector<Mat> gru_backward(const GruCache& cache, const GruParams& p, const Mat& grad_h,
                              GruParams& grad);

enum class TimeLossSign {
  kStandard,  // leading minus, minimised pulls u^L and u^S together
  kLiteral,   // no leading minus: the positive-pair log ratio itself
};

struct TimeTerms {
  double long_term = 0;   // anchor u^L, positive u^S, denominator u^L_b
  double short_term = 0;  // anchor u^S, positive u^L, denominator u^S_b
};

// Contrast long- and short-term channels over `nodes` (rows of UL / US);
// each denominator runs over the other nodes b != a in `nodes`.
TimeTerms time_infonce(const Mat& UL, const Mat& US, std::span<const NodeIndex> nodes,
                       double tau, TimeLossSign sign = TimeLossSign::kStandard);

void time_infonce_backward(const Mat& UL, const Mat& US, std::span<const NodeIndex> nodes,
                           double tau, TimeLossSign sign, double weight, Mat& grad_UL,
                           Mat& grad_US);

// u^T = (u^L + u^S) / 2.
Mat fuse_final(const Mat& UL, const Mat& US);

}  // namespace clp

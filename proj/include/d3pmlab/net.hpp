#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "d3pmlab/rng.hpp"
#include "d3pmlab/types.hpp"

namespace d3pmlab {

// Position-wise embedding + single hidden layer + softmax head, with an
// optional single-head self-attention mixing layer. The same skeleton serves
// the diffusion denoiser (bidirectional, time-conditioned) and the
// autoregressive model (causal, no time input).
struct NetConfig {
  int vocab_in = 0;       // token embedding rows
  int out_dim = 0;        // logit count
  int max_positions = 0;  // positional embedding rows
  int embed_dim = 32;
  int hidden_dim = 64;
  int time_features = 0;  // 0 disables time conditioning
  bool attention = false;
  bool causal = false;

  void validate() const;
};

struct NetParams {
  NetConfig config;
  Mat tok_emb;   // vocab_in x E
  Mat pos_emb;   // max_positions x E
  Mat time_w;    // time_features x E
  Mat wq, wk, wv;  // E x E when attention is enabled, else empty
  Mat w1;        // E x H
  Mat b1;        // H x 1
  Mat w2;        // H x out, zero-initialized so untrained nets are uniform
  Mat b2;        // out x 1

  // Embeddings and hidden weights uniform in +-0.05, output head zero.
  static NetParams init(const NetConfig& config, std::uint64_t seed);
  static NetParams zeros_like(const NetConfig& config);

  // Stable tensor order; also the checkpoint serialization order.
  template <typename F>
  void for_each(F&& fn) {
    fn("tok_emb", tok_emb);
    fn("pos_emb", pos_emb);
    fn("time_w", time_w);
    fn("wq", wq);
    fn("wk", wk);
    fn("wv", wv);
    fn("w1", w1);
    fn("b1", b1);
    fn("w2", w2);
    fn("b2", b2);
  }
  template <typename F>
  void for_each(F&& fn) const {
    const_cast<NetParams*>(this)->for_each(
        [&](const char* name, Mat& m) { fn(name, static_cast<const Mat&>(m)); });
  }

  std::int64_t param_count() const;
  double get_flat(std::int64_t index) const;
  void set_flat(std::int64_t index, double value);

  // Constrain every entry to an exactly float-representable value, keeping
  // the 32-bit checkpoint round trip lossless.
  void round_to_f32();
  void axpy(double scale, const NetParams& other);  // this += scale * other
};

struct ForwardCache {
  std::vector<TokenId> ids;
  std::vector<int> pos;
  int seq_len = 0;  // attention group length (ids.size() must be a multiple)
  Eigen::RowVectorXd time_feat;  // 1 x F, empty when unconditioned
  Mat x_pre;    // N x E embedding sums
  Mat x;        // N x E after attention (aliases x_pre layout otherwise)
  std::vector<Mat> attn_q, attn_k, attn_v, attn_a;
  Mat hidden;   // N x H
  Mat logits;   // N x out
  Mat probs;    // N x out
};

// ids/pos are flattened element streams. With attention enabled, each
// consecutive seq_len block forms one attention group. `time` must be in
// [0, 1] when the config has time features and is ignored otherwise.
ForwardCache net_forward(const NetParams& params, std::vector<TokenId> ids,
                         std::vector<int> pos, int seq_len, double time);

// Gradient of a scalar loss with the given d(loss)/d(logits).
NetParams net_backward(const NetParams& params, const ForwardCache& cache,
                       const Mat& d_logits);

Eigen::RowVectorXd time_feature_row(int count, double time);
void softmax_rows_inplace(Mat& m);

// Central-difference check of `analytic` against `loss` on up to max_params
// randomly sampled coordinates. Returns the maximum relative error with a
// 1e-6 absolute floor. `params` is restored on exit.
double grad_check_core(NetParams& params, const std::function<double(const NetParams&)>& loss,
                       const NetParams& analytic, Rng rng, int max_params, double epsilon);

}  // namespace d3pmlab

#pragma once

#include <cstdint>
#include <utility>

#include "d3pmlab/corpus.hpp"
#include "d3pmlab/diffusion.hpp"
#include "d3pmlab/net.hpp"
#include "d3pmlab/nelbo.hpp"
#include "d3pmlab/training.hpp"

namespace d3pmlab {

// Architecture knobs shared by the denoiser and the autoregressive model.
struct ModelArch {
  int embed_dim = 32;
  int hidden_dim = 64;
  int time_features = 8;  // denoiser only
  bool attention = false;
  int context = 64;  // autoregressive window
};

// Always predicts a fixed target grid, one-hot. The posterior turns it into
// an exact reverse process, which pins every KL term to zero.
class OracleDenoiser : public Denoiser {
 public:
  OracleDenoiser(IdMat target, int num_real_tokens)
      : target_(std::move(target)), m_(num_real_tokens) {}
  int num_real_tokens() const override { return m_; }
  Mat denoise(const IdMat& noisy_ids, double time) const override;

 private:
  IdMat target_;
  int m_;
};

class UniformDenoiser : public Denoiser {
 public:
  explicit UniformDenoiser(int num_real_tokens) : m_(num_real_tokens) {}
  int num_real_tokens() const override { return m_; }
  Mat denoise(const IdMat& noisy_ids, double time) const override;

 private:
  int m_;
};

// Output depends only on the observed state: row x_t of the table is the
// predicted clean distribution. For enumeration tests.
class TabularDenoiser : public Denoiser {
 public:
  explicit TabularDenoiser(Mat table);  // (m+1) x m, rows on the simplex
  int num_real_tokens() const override { return static_cast<int>(table_.cols()); }
  Mat denoise(const IdMat& noisy_ids, double time) const override;

 private:
  Mat table_;
};

class NeuralDenoiser : public Denoiser {
 public:
  explicit NeuralDenoiser(NetParams params);
  int num_real_tokens() const override { return params_.config.out_dim; }
  Mat denoise(const IdMat& noisy_ids, double time) const override;
  const NetParams& params() const { return params_; }

 private:
  NetParams params_;
};

NetParams init_denoiser_params(int num_real_tokens, int seq_len, const ModelArch& arch,
                               std::uint64_t seed);

// Loss and gradient of the single-time-index NELBO estimator for one batch.
// Reproduces training_loss(x0, ..., seed) exactly: same sampled time index,
// same forward corruption.
std::pair<double, NetParams> denoiser_loss_grads(const NetParams& params, const IdMat& x0,
                                                 const NoiseSchedule& schedule,
                                                 std::uint64_t seed);

struct DenoiserTrainResult {
  NetParams params;
  TrainLog log;
};

// Gradient descent on the NELBO estimator with warmup-then-constant rate.
// Passing resume_params with start_step > 0 continues a checkpointed run;
// the result is identical to an uninterrupted run of the same config.
DenoiserTrainResult train_denoiser(const CorpusSplit& split, const Tokenizer& tok,
                                   const NoiseSchedule& schedule, const TrainConfig& config,
                                   const ModelArch& arch,
                                   const NetParams* resume_params = nullptr,
                                   int start_step = 0);

// Central-difference check of denoiser_loss_grads on sampled coordinates.
double denoiser_grad_check(const NetParams& params, const IdMat& x0,
                           const NoiseSchedule& schedule, std::uint64_t seed,
                           double epsilon, int max_params = 200);

}  // namespace d3pmlab

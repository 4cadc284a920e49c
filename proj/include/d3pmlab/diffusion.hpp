#pragma once

#include <cstdint>
#include <utility>

#include "d3pmlab/schedule.hpp"
#include "d3pmlab/types.hpp"

namespace d3pmlab {

// Denoiser contract: given a noisy id grid (values in [0, m]) and a time in
// [0, 1], produce for every position a distribution over the m real tokens.
// Row b*L + p of the result belongs to position (b, p). Implementations may
// return m+1 columns, but any mass on the mask column is a contract
// violation that consumers reject.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual int num_real_tokens() const = 0;
  virtual Mat denoise(const IdMat& noisy_ids, double time) const = 0;
};

// Validates and normalizes denoiser output to exactly m columns.
Mat checked_denoiser_output(const Denoiser& denoiser, const IdMat& noisy_ids, double time);

struct NoisyState {
  IdMat ids;           // values in [0, m]
  int time_index = 0;  // i in [0, T]
};

// Single-step transition matrix (1-beta) I + beta 1 e_m^T on the augmented
// (m+1)-state space; row-stochastic with [Q]_{jk} = P(next=k | current=j).
Mat step_matrix(double beta, int num_real_tokens);

// i-step cumulative transition in closed form:
// alpha_bar(i) I + (1 - alpha_bar(i)) 1 e_m^T.
Mat cumulative_matrix(const NoiseSchedule& schedule, int i, int num_real_tokens);

// Same matrix as the explicit product Q_1 Q_2 ... Q_i. Kept as the slow
// algebraic cross-check for the closed form.
Mat cumulative_matrix_product(const NoiseSchedule& schedule, int i, int num_real_tokens);

// q(x_i | x_0): alpha_bar(i) on the clean token, the rest on the mask.
CategoricalDist forward_marginal(TokenId x0_id, const NoiseSchedule& schedule, int i,
                                 int num_real_tokens);

// Draws x_i ~ q(x_i | x_0) independently per position.
NoisyState forward_sample(const IdMat& batch, const NoiseSchedule& schedule, int i,
                          int num_real_tokens, std::uint64_t seed);

// One forward step i-1 -> i applied to an existing noisy state (each
// unmasked token masks with probability beta_i). For trajectory tests.
NoisyState forward_step_sample(const NoisyState& state, const NoiseSchedule& schedule,
                               int i, int num_real_tokens, std::uint64_t seed);

// Time-reversal posterior q(x_{s(j)} | x_{t(i)}, x_0) with the clean token
// generalized to a distribution over real tokens (zero mass on the mask).
// An unmasked x_t pins the posterior to itself; a masked x_t splits
// (alpha_bar(j) - alpha_bar(i)) * x0_dist across real tokens and keeps
// (1 - alpha_bar(j)) on the mask, normalized by (1 - alpha_bar(i)).
CategoricalDist posterior(TokenId xt_id, const CategoricalDist& x0_dist,
                          const NoiseSchedule& schedule, int i, int j,
                          int num_real_tokens);

struct SampleStats {
  double wall_seconds = 0.0;
  double tokens_per_sec = 0.0;
  double batches_per_sec = 0.0;
  int steps = 0;
};

// Reverse-process ancestral sampling: start all-mask at time T, walk an
// evenly spaced `steps`-interval sub-grid down to 0, at each interval plug
// the denoiser estimate into the posterior and sample categorically.
std::pair<IdMat, SampleStats> ancestral_sample(const Denoiser& denoiser,
                                               const NoiseSchedule& schedule,
                                               int batch_size, int seq_len, int steps,
                                               std::uint64_t seed);

}  // namespace d3pmlab

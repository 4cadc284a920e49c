#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "d3pmlab/diffusion.hpp"
#include "d3pmlab/types.hpp"

namespace d3pmlab {

// Variational bound decomposition, all terms in nats per token.
struct NelboBreakdown {
  double l_T = 0.0;
  double l_0 = 0.0;
  std::vector<double> l_mid;  // KL terms for t = 2..T
  double total = 0.0;

  double mid_sum() const;
  void validate() const;  // nonnegativity and additivity
};

// How the expectation over forward samples x_t is taken. `sampled` draws one
// x_t per step (the training estimator); `exhaustive` enumerates every mask
// pattern, which is exact but limited to tiny batches (<= 16 positions).
enum class Expectation { sampled, exhaustive };

// KL(p || q) in nats with the 0 ln 0 convention; q must dominate p.
double kl_categorical(const CategoricalDist& p, const CategoricalDist& q);

NelboBreakdown nelbo_terms(const IdMat& x0, const Denoiser& denoiser,
                           const NoiseSchedule& schedule, std::uint64_t seed,
                           Expectation mode = Expectation::sampled);

struct TrainingLoss {
  double loss = 0.0;  // nats/token, unbiased estimate of total - L_T
  int time_index = 0;
};

// Single-time-index estimator: i ~ U{1..T}, loss = T * (term at i), where the
// term at i=1 is the reconstruction loss and otherwise the KL at i.
TrainingLoss training_loss(const IdMat& x0, const Denoiser& denoiser,
                           const NoiseSchedule& schedule, std::uint64_t seed,
                           Expectation mode = Expectation::sampled);

namespace nelbo_detail {
// Per-token value of the term selected by time index i, using the same
// forward samples as nelbo_terms. Exposed so training code and tests agree
// on the estimator bit for bit.
double per_step_term(const IdMat& x0, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, int i, std::uint64_t seed,
                     Expectation mode);
}  // namespace nelbo_detail

}  // namespace d3pmlab

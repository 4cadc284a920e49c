#pragma once

#include "d3pmlab/diffusion.hpp"
#include "d3pmlab/nelbo.hpp"

namespace d3pmlab {
namespace oracle {

// Brute-force references computed straight from the per-step beta values by
// enumerating state paths. They share no code with the closed-form
// implementations they check (no transition matrices, no alpha_bar).

// P(state b at step i | state a at step j), summing over every intermediate
// state sequence.
double transition_prob(const NoiseSchedule& schedule, int j, int i, int a, int b, int m);

// Marginal P(state k at step j | clean token ~ x0_dist at step 0).
double marginal_prob(const NoiseSchedule& schedule, int j, int k,
                     const CategoricalDist& x0_dist, int m);

// Bayes posterior q(x_j = . | x_i = xt, x_0 ~ x0_dist) from the enumerated
// forward probabilities.
CategoricalDist posterior_bayes(TokenId xt, const CategoricalDist& x0_dist,
                                const NoiseSchedule& schedule, int i, int j, int m);

// Exact NELBO decomposition for a single clean token, every expectation
// enumerated.
NelboBreakdown nelbo_single_token(TokenId x0, const Denoiser& denoiser,
                                  const NoiseSchedule& schedule, int m);

// Exact log-likelihood of the plug-in reverse chain for a single token:
// log sum over reverse trajectories from the all-mask start.
double reverse_model_logprob_single_token(TokenId x0, const Denoiser& denoiser,
                                          const NoiseSchedule& schedule, int m);

}  // namespace oracle
}  // namespace d3pmlab

#include "d3pmlab/oracles.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace d3pmlab {
namespace oracle {
namespace {

// Single forward step straight from the matrix definition, element by
// element: stay with 1-beta, mask with beta, absorb once masked.
double one_step(double beta, int from, int to, int m) {
  if (from == m) return to == m ? 1.0 : 0.0;
  if (to == from) return 1.0 - beta;
  if (to == m) return beta;
  return 0.0;
}

double x0_mass(const CategoricalDist& x0_dist, int a, int m) {
  if (a == m) return x0_dist.size() == m + 1 ? x0_dist.probs[m] : 0.0;
  return x0_dist.probs[a];
}

double kl_terms(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[k] * std::log(p[k] / q[k]);
  }
  return kl;
}

std::vector<double> to_vector(const CategoricalDist& d) {
  return {d.probs.data(), d.probs.data() + d.probs.size()};
}

CategoricalDist denoiser_dist(const Denoiser& denoiser, int state, double time, int m) {
  IdMat ids(1, 1);
  ids(0, 0) = state;
  const Mat probs = checked_denoiser_output(denoiser, ids, time);
  (void)m;
  return CategoricalDist(probs.row(0).transpose());
}

}  // namespace

double transition_prob(const NoiseSchedule& schedule, int j, int i, int a, int b, int m) {
  require(0 <= j && j <= i && i <= schedule.T(), Errc::bad_times,
          "transition needs 0 <= j <= i <= T");
  if (j == i) return a == b ? 1.0 : 0.0;
  double sum = 0.0;
  for (int z = 0; z <= m; ++z) {
    const double first = one_step(schedule.beta(j + 1), a, z, m);
    if (first == 0.0) continue;
    sum += first * transition_prob(schedule, j + 1, i, z, b, m);
  }
  return sum;
}

double marginal_prob(const NoiseSchedule& schedule, int j, int k,
                     const CategoricalDist& x0_dist, int m) {
  double sum = 0.0;
  for (int a = 0; a <= m; ++a) {
    const double mass = x0_mass(x0_dist, a, m);
    if (mass == 0.0) continue;
    sum += mass * transition_prob(schedule, 0, j, a, k, m);
  }
  return sum;
}

CategoricalDist posterior_bayes(TokenId xt, const CategoricalDist& x0_dist,
                                const NoiseSchedule& schedule, int i, int j, int m) {
  require(j < i, Errc::bad_times, "posterior needs j < i");
  Vec probs = Vec::Zero(m + 1);
  for (int k = 0; k <= m; ++k) {
    probs[k] = transition_prob(schedule, j, i, k, xt, m) *
               marginal_prob(schedule, j, k, x0_dist, m);
  }
  const double norm = probs.sum();
  require(norm > 0.0, Errc::bad_times, "conditioning on an unreachable state");
  probs /= norm;
  return CategoricalDist(std::move(probs));
}

NelboBreakdown nelbo_single_token(TokenId x0, const Denoiser& denoiser,
                                  const NoiseSchedule& schedule, int m) {
  const int T = schedule.T();
  NelboBreakdown out;

  // Prior term against the all-mask point prior.
  for (int k = 0; k <= m; ++k) {
    const double q = transition_prob(schedule, 0, T, x0, k, m);
    if (q == 0.0) continue;
    if (k != m) {
      out.l_T = std::numeric_limits<double>::infinity();
      break;
    }
    out.l_T += q * std::log(q / 1.0);
  }

  // Reconstruction: E over x_1 of -log p_theta(x_0 | x_1).
  for (int x1 = 0; x1 <= m; ++x1) {
    const double q = transition_prob(schedule, 0, 1, x0, x1, m);
    if (q == 0.0) continue;
    const CategoricalDist plug = posterior_bayes(
        x1, denoiser_dist(denoiser, x1, schedule.t_time(1), m), schedule, 1, 0, m);
    out.l_0 += q * -std::log(plug.probs[x0]);
  }

  // Intermediate KL terms, expectation over x_i enumerated.
  for (int i = 2; i <= T; ++i) {
    double term = 0.0;
    for (int xi = 0; xi <= m; ++xi) {
      const double q = transition_prob(schedule, 0, i, x0, xi, m);
      if (q == 0.0) continue;
      const CategoricalDist truth =
          posterior_bayes(xi, CategoricalDist::one_hot(m + 1, x0), schedule, i, i - 1, m);
      const CategoricalDist plug = posterior_bayes(
          xi, denoiser_dist(denoiser, xi, schedule.t_time(i), m), schedule, i, i - 1, m);
      term += q * kl_terms(to_vector(truth), to_vector(plug));
    }
    out.l_mid.push_back(term);
  }

  out.total = out.l_T + out.l_0 + out.mid_sum();
  return out;
}

double reverse_model_logprob_single_token(TokenId x0, const Denoiser& denoiser,
                                          const NoiseSchedule& schedule, int m) {
  const int T = schedule.T();
  // Occupancy of the reverse chain, starting from the all-mask prior.
  std::vector<double> occupancy(static_cast<std::size_t>(m) + 1, 0.0);
  occupancy[static_cast<std::size_t>(m)] = 1.0;
  for (int i = T; i >= 1; --i) {
    std::vector<double> next(static_cast<std::size_t>(m) + 1, 0.0);
    for (int s = 0; s <= m; ++s) {
      const double mass = occupancy[static_cast<std::size_t>(s)];
      if (mass == 0.0) continue;
      const CategoricalDist step = posterior_bayes(
          s, denoiser_dist(denoiser, s, schedule.t_time(i), m), schedule, i, i - 1, m);
      for (int z = 0; z <= m; ++z) {
        next[static_cast<std::size_t>(z)] += mass * step.probs[z];
      }
    }
    occupancy = std::move(next);
  }
  return std::log(occupancy[static_cast<std::size_t>(x0)]);
}

}  // namespace oracle
}  // namespace d3pmlab

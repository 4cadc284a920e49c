#include "d3pmlab/nelbo.hpp"

#include <cmath>

#include "d3pmlab/rng.hpp"

namespace d3pmlab {

double NelboBreakdown::mid_sum() const {
  double sum = 0.0;
  for (const double v : l_mid) sum += v;
  return sum;
}

void NelboBreakdown::validate() const {
  const double tol = 1e-12;
  require(l_T >= -tol && l_0 >= -tol, Errc::shape_mismatch,
          "negative NELBO component");
  for (const double v : l_mid) {
    require(v >= -tol, Errc::shape_mismatch, "negative KL component");
  }
  require(std::abs(total - (l_T + l_0 + mid_sum())) <= 1e-10, Errc::shape_mismatch,
          "NELBO components do not add up");
}

double kl_categorical(const CategoricalDist& p, const CategoricalDist& q) {
  require(p.size() == q.size() && p.size() > 0, Errc::shape_mismatch,
          "KL operands must share a support");
  double kl = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double pk = p.probs[k];
    if (pk == 0.0) continue;
    require(q.probs[k] > 0.0, Errc::support_mismatch,
            "p has mass where q has none (index " + std::to_string(k) + ")");
    kl += pk * std::log(pk / q.probs[k]);
  }
  return kl;
}

namespace nelbo_detail {
namespace {

// Per-token contribution of step i given a concrete noisy state x_i.
// For i == 1 this is the reconstruction NLL -log p_theta(x_0 | x_1); for
// i >= 2 the KL between the true and the plug-in posterior at (i, i-1).
double state_term(const IdMat& x0, const IdMat& xi, const Mat& x0_probs,
                  const NoiseSchedule& schedule, int i, int m) {
  const Eigen::Index rows = x0.rows();
  const Eigen::Index cols = x0.cols();
  double sum = 0.0;
  for (Eigen::Index b = 0; b < rows; ++b) {
    for (Eigen::Index p = 0; p < cols; ++p) {
      const TokenId clean = x0(b, p);
      const TokenId noisy = xi(b, p);
      if (noisy != m) continue;  // unmasked: both posteriors clamp, zero term
      const auto row = x0_probs.row(b * cols + p);
      if (i == 1) {
        sum += -std::log(row[clean]);
        continue;
      }
      CategoricalDist truth =
          posterior(noisy, CategoricalDist::one_hot(m, clean), schedule, i, i - 1, m);
      CategoricalDist plug =
          posterior(noisy, CategoricalDist(row.transpose()), schedule, i, i - 1, m);
      sum += kl_categorical(truth, plug);
    }
  }
  return sum / static_cast<double>(rows * cols);
}

double exhaustive_term(const IdMat& x0, const Denoiser& denoiser,
                       const NoiseSchedule& schedule, int i, int m) {
  const Eigen::Index positions = x0.rows() * x0.cols();
  require(positions <= 16, Errc::shape_mismatch,
          "exhaustive expectation is limited to 16 positions");
  const double mask_prob = 1.0 - schedule.alpha_bar(i);
  const double keep_prob = schedule.alpha_bar(i);
  double expectation = 0.0;
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << positions); ++pattern) {
    double weight = 1.0;
    IdMat xi = x0;
    for (Eigen::Index pos = 0; pos < positions; ++pos) {
      const bool masked = (pattern >> pos) & 1u;
      weight *= masked ? mask_prob : keep_prob;
      if (masked) xi(pos / x0.cols(), pos % x0.cols()) = m;
    }
    if (weight == 0.0) continue;
    const Mat probs = checked_denoiser_output(denoiser, xi, schedule.t_time(i));
    expectation += weight * state_term(x0, xi, probs, schedule, i, m);
  }
  return expectation;
}

}  // namespace

double per_step_term(const IdMat& x0, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, int i, std::uint64_t seed,
                     Expectation mode) {
  const int m = denoiser.num_real_tokens();
  if (mode == Expectation::exhaustive) {
    return exhaustive_term(x0, denoiser, schedule, i, m);
  }
  const NoisyState xi = forward_sample(x0, schedule, i, m, seed);
  const Mat probs = checked_denoiser_output(denoiser, xi.ids, schedule.t_time(i));
  return state_term(x0, xi.ids, probs, schedule, i, m);
}

}  // namespace nelbo_detail

NelboBreakdown nelbo_terms(const IdMat& x0, const Denoiser& denoiser,
                           const NoiseSchedule& schedule, std::uint64_t seed,
                           Expectation mode) {
  const int m = denoiser.num_real_tokens();
  const int T = schedule.T();
  require(x0.size() > 0, Errc::empty_input, "empty clean batch");

  NelboBreakdown out;
  // Prior term: KL(q(x_T | x_0) || p(x_T)) against the all-mask point prior.
  // Zero for fully masking schedules; any residual retention at T means the
  // prior cannot dominate the marginal and the KL is infinite.
  {
    const double retained = schedule.alpha_bar(T);
    Vec q_xT = Vec::Zero(m + 1);
    q_xT[x0(0, 0)] = retained;
    q_xT[m] = 1.0 - retained;
    out.l_T = kl_categorical(CategoricalDist(std::move(q_xT)),
                             CategoricalDist::one_hot(m + 1, m));
  }

  out.l_0 = nelbo_detail::per_step_term(x0, denoiser, schedule, 1, seed, mode);
  out.l_mid.reserve(static_cast<std::size_t>(T > 1 ? T - 1 : 0));
  for (int i = 2; i <= T; ++i) {
    out.l_mid.push_back(nelbo_detail::per_step_term(x0, denoiser, schedule, i, seed, mode));
  }
  out.total = out.l_T + out.l_0 + out.mid_sum();
  return out;
}

TrainingLoss training_loss(const IdMat& x0, const Denoiser& denoiser,
                           const NoiseSchedule& schedule, std::uint64_t seed,
                           Expectation mode) {
  const int T = schedule.T();
  require(x0.size() > 0, Errc::empty_input, "empty clean batch");
  TrainingLoss result;
  result.time_index = Rng(seed).stream("time_index").uniform_int(T) + 1;
  result.loss = static_cast<double>(T) *
                nelbo_detail::per_step_term(x0, denoiser, schedule, result.time_index,
                                            seed, mode);
  require(std::isfinite(result.loss), Errc::non_finite_loss,
          "non-finite NELBO estimate");
  return result;
}

}  // namespace d3pmlab

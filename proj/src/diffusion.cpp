#include "d3pmlab/diffusion.hpp"

#include <chrono>
#include <vector>

#include "d3pmlab/rng.hpp"

namespace d3pmlab {
namespace {

void check_times(const NoiseSchedule& schedule, int i, int j) {
  require(i >= 0 && i <= schedule.T(), Errc::index_out_of_range,
          "time index i=" + std::to_string(i) + " outside [0, T]");
  require(j >= 0 && j <= schedule.T(), Errc::index_out_of_range,
          "time index j=" + std::to_string(j) + " outside [0, T]");
  require(j < i, Errc::bad_times,
          "posterior needs j < i, got j=" + std::to_string(j) + " i=" + std::to_string(i));
}

}  // namespace

Mat checked_denoiser_output(const Denoiser& denoiser, const IdMat& noisy_ids, double time) {
  const int m = denoiser.num_real_tokens();
  Mat probs = denoiser.denoise(noisy_ids, time);
  require(probs.rows() == noisy_ids.rows() * noisy_ids.cols(), Errc::shape_mismatch,
          "denoiser returned wrong number of rows");
  if (probs.cols() == m + 1) {
    require(probs.col(m).isZero(0.0), Errc::denoiser_mass_on_mask,
            "denoiser output puts probability on the mask state");
    return probs.leftCols(m);
  }
  require(probs.cols() == m, Errc::shape_mismatch, "denoiser returned wrong width");
  return probs;
}

Mat step_matrix(double beta, int num_real_tokens) {
  require(beta >= 0.0 && beta <= 1.0, Errc::bad_beta, "beta outside [0, 1]");
  require(num_real_tokens >= 1, Errc::shape_mismatch, "need at least one real token");
  const int m = num_real_tokens;
  Mat q = Mat::Zero(m + 1, m + 1);
  q.diagonal().setConstant(1.0 - beta);
  q.col(m).setConstant(beta);
  q.row(m).setZero();
  q(m, m) = 1.0;  // absorbing: the raw (1-beta)+beta diagonal is exactly 1
  return q;
}

Mat cumulative_matrix(const NoiseSchedule& schedule, int i, int num_real_tokens) {
  require(i >= 0 && i <= schedule.T(), Errc::index_out_of_range,
          "cumulative index " + std::to_string(i) + " outside [0, T]");
  const int m = num_real_tokens;
  const double retained = schedule.alpha_bar(i);
  Mat q = Mat::Zero(m + 1, m + 1);
  q.diagonal().setConstant(retained);
  q.col(m).setConstant(1.0 - retained);
  q.row(m).setZero();
  q(m, m) = 1.0;
  return q;
}

Mat cumulative_matrix_product(const NoiseSchedule& schedule, int i, int num_real_tokens) {
  require(i >= 0 && i <= schedule.T(), Errc::index_out_of_range,
          "cumulative index " + std::to_string(i) + " outside [0, T]");
  Mat q = Mat::Identity(num_real_tokens + 1, num_real_tokens + 1);
  for (int k = 1; k <= i; ++k) {
    q = q * step_matrix(schedule.beta(k), num_real_tokens);
  }
  return q;
}

CategoricalDist forward_marginal(TokenId x0_id, const NoiseSchedule& schedule, int i,
                                 int num_real_tokens) {
  const int m = num_real_tokens;
  require(x0_id >= 0 && x0_id <= m, Errc::index_out_of_range, "token id out of range");
  require(x0_id != m, Errc::mask_as_clean, "clean data cannot contain the mask state");
  require(i >= 0 && i <= schedule.T(), Errc::index_out_of_range,
          "time index outside [0, T]");
  Vec probs = Vec::Zero(m + 1);
  probs[x0_id] = schedule.alpha_bar(i);
  probs[m] = 1.0 - schedule.alpha_bar(i);
  return CategoricalDist(std::move(probs));
}

NoisyState forward_sample(const IdMat& batch, const NoiseSchedule& schedule, int i,
                          int num_real_tokens, std::uint64_t seed) {
  require(i >= 1 && i <= schedule.T(), Errc::index_out_of_range,
          "forward sample needs i in [1, T]");
  const int m = num_real_tokens;
  const double mask_prob = 1.0 - schedule.alpha_bar(i);
  NoisyState state;
  state.ids = batch;
  state.time_index = i;
  Rng base = Rng(seed).stream("forward_sample").stream(static_cast<std::uint64_t>(i));
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    Rng row = base.stream(static_cast<std::uint64_t>(b));
    for (Eigen::Index p = 0; p < batch.cols(); ++p) {
      require(batch(b, p) >= 0 && batch(b, p) < m, Errc::mask_as_clean,
              "clean batch contains an out-of-vocabulary id");
      if (row.bernoulli(mask_prob)) state.ids(b, p) = m;
    }
  }
  return state;
}

NoisyState forward_step_sample(const NoisyState& state, const NoiseSchedule& schedule,
                               int i, int num_real_tokens, std::uint64_t seed) {
  require(i >= 1 && i <= schedule.T(), Errc::index_out_of_range,
          "forward step needs i in [1, T]");
  require(state.time_index == i - 1, Errc::bad_times,
          "forward step expects a state at time i-1");
  const int m = num_real_tokens;
  const double beta = schedule.beta(i);
  NoisyState out;
  out.ids = state.ids;
  out.time_index = i;
  Rng base = Rng(seed).stream("forward_step").stream(static_cast<std::uint64_t>(i));
  for (Eigen::Index b = 0; b < out.ids.rows(); ++b) {
    Rng row = base.stream(static_cast<std::uint64_t>(b));
    for (Eigen::Index p = 0; p < out.ids.cols(); ++p) {
      const bool mask_now = row.bernoulli(beta);
      if (out.ids(b, p) != m && mask_now) out.ids(b, p) = m;
    }
  }
  return out;
}

CategoricalDist posterior(TokenId xt_id, const CategoricalDist& x0_dist,
                          const NoiseSchedule& schedule, int i, int j,
                          int num_real_tokens) {
  const int m = num_real_tokens;
  check_times(schedule, i, j);
  require(xt_id >= 0 && xt_id <= m, Errc::index_out_of_range, "state id out of range");
  require(x0_dist.size() == m || x0_dist.size() == m + 1, Errc::shape_mismatch,
          "clean-token distribution has wrong size");
  require(x0_dist.size() == m || x0_dist.probs[m] == 0.0, Errc::mask_as_clean,
          "clean-token distribution puts mass on the mask state");

  Vec probs = Vec::Zero(m + 1);
  if (xt_id != m) {
    // Absorption: an unmasked token at time t was never masked.
    probs[xt_id] = 1.0;
    return CategoricalDist(std::move(probs));
  }
  const double a_j = schedule.alpha_bar(j);
  const double a_i = schedule.alpha_bar(i);
  const double denom = 1.0 - a_i;
  probs.head(m) = (a_j - a_i) / denom * x0_dist.probs.head(m);
  probs[m] = (1.0 - a_j) / denom;
  return CategoricalDist(std::move(probs));
}

std::pair<IdMat, SampleStats> ancestral_sample(const Denoiser& denoiser,
                                               const NoiseSchedule& schedule,
                                               int batch_size, int seq_len, int steps,
                                               std::uint64_t seed) {
  const int T = schedule.T();
  require(steps >= 1 && steps <= T, Errc::index_out_of_range,
          "sampling steps must lie in [1, T]");
  require(batch_size >= 1 && seq_len >= 1, Errc::shape_mismatch, "empty sample shape");
  const int m = denoiser.num_real_tokens();

  // Evenly spaced time sub-grid T = g_0 > g_1 > ... > g_steps = 0.
  std::vector<int> grid(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    grid[static_cast<std::size_t>(k)] =
        static_cast<int>(std::llround(static_cast<double>(T) *
                                      static_cast<double>(steps - k) / steps));
  }

  IdMat ids = IdMat::Constant(batch_size, seq_len, m);
  Rng base = Rng(seed).stream("ancestral");
  const auto started = std::chrono::steady_clock::now();
  for (int k = 0; k < steps; ++k) {
    const int hi = grid[static_cast<std::size_t>(k)];
    const int lo = grid[static_cast<std::size_t>(k) + 1];
    const Mat x0_probs = checked_denoiser_output(denoiser, ids, schedule.t_time(hi));
    Rng step_rng = base.stream(static_cast<std::uint64_t>(k));
    for (int b = 0; b < batch_size; ++b) {
      Rng row = step_rng.stream(static_cast<std::uint64_t>(b));
      for (int p = 0; p < seq_len; ++p) {
        if (ids(b, p) != m) continue;  // posterior clamps unmasked positions
        CategoricalDist x0_dist(x0_probs.row(b * seq_len + p).transpose());
        CategoricalDist next = posterior(m, x0_dist, schedule, hi, lo, m);
        ids(b, p) = static_cast<TokenId>(row.categorical(next.probs));
      }
    }
  }
  const auto finished = std::chrono::steady_clock::now();

  SampleStats stats;
  stats.steps = steps;
  stats.wall_seconds = std::chrono::duration<double>(finished - started).count();
  const double tokens = static_cast<double>(batch_size) * seq_len;
  stats.tokens_per_sec = stats.wall_seconds > 0 ? tokens / stats.wall_seconds : 0.0;
  stats.batches_per_sec = stats.wall_seconds > 0 ? 1.0 / stats.wall_seconds : 0.0;
  return {std::move(ids), stats};
}

}  // namespace d3pmlab

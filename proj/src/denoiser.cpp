#include "d3pmlab/denoiser.hpp"

#include <cmath>

namespace d3pmlab {

Mat OracleDenoiser::denoise(const IdMat& noisy_ids, double /*time*/) const {
  require(noisy_ids.rows() == target_.rows() && noisy_ids.cols() == target_.cols(),
          Errc::shape_mismatch, "oracle target shape does not match input");
  Mat probs = Mat::Zero(noisy_ids.rows() * noisy_ids.cols(), m_);
  for (Eigen::Index b = 0; b < noisy_ids.rows(); ++b) {
    for (Eigen::Index p = 0; p < noisy_ids.cols(); ++p) {
      probs(b * noisy_ids.cols() + p, target_(b, p)) = 1.0;
    }
  }
  return probs;
}

Mat UniformDenoiser::denoise(const IdMat& noisy_ids, double /*time*/) const {
  return Mat::Constant(noisy_ids.rows() * noisy_ids.cols(), m_, 1.0 / m_);
}

TabularDenoiser::TabularDenoiser(Mat table) : table_(std::move(table)) {
  require(table_.rows() == table_.cols() + 1, Errc::shape_mismatch,
          "table must have one row per augmented state");
  for (Eigen::Index r = 0; r < table_.rows(); ++r) {
    CategoricalDist(table_.row(r).transpose()).check(1e-9);
  }
}

Mat TabularDenoiser::denoise(const IdMat& noisy_ids, double /*time*/) const {
  Mat probs(noisy_ids.rows() * noisy_ids.cols(), table_.cols());
  for (Eigen::Index b = 0; b < noisy_ids.rows(); ++b) {
    for (Eigen::Index p = 0; p < noisy_ids.cols(); ++p) {
      probs.row(b * noisy_ids.cols() + p) = table_.row(noisy_ids(b, p));
    }
  }
  return probs;
}

NeuralDenoiser::NeuralDenoiser(NetParams params) : params_(std::move(params)) {
  require(params_.config.vocab_in == params_.config.out_dim + 1, Errc::shape_mismatch,
          "denoiser must embed the mask state and predict real tokens only");
  require(params_.config.time_features > 0, Errc::shape_mismatch,
          "denoiser requires time conditioning");
}

Mat NeuralDenoiser::denoise(const IdMat& noisy_ids, double time) const {
  const auto cols = noisy_ids.cols();
  require(cols <= params_.config.max_positions, Errc::shape_mismatch,
          "sequence longer than the positional table");
  std::vector<TokenId> ids;
  std::vector<int> pos;
  ids.reserve(static_cast<std::size_t>(noisy_ids.size()));
  pos.reserve(static_cast<std::size_t>(noisy_ids.size()));
  for (Eigen::Index b = 0; b < noisy_ids.rows(); ++b) {
    for (Eigen::Index p = 0; p < cols; ++p) {
      ids.push_back(noisy_ids(b, p));
      pos.push_back(static_cast<int>(p));
    }
  }
  ForwardCache cache = net_forward(params_, std::move(ids), std::move(pos),
                                   static_cast<int>(cols), time);
  return std::move(cache.probs);
}

NetParams init_denoiser_params(int num_real_tokens, int seq_len, const ModelArch& arch,
                               std::uint64_t seed) {
  NetConfig cfg;
  cfg.vocab_in = num_real_tokens + 1;  // mask state included
  cfg.out_dim = num_real_tokens;       // mask structurally excluded
  cfg.max_positions = seq_len;
  cfg.embed_dim = arch.embed_dim;
  cfg.hidden_dim = arch.hidden_dim;
  cfg.time_features = arch.time_features > 0 ? arch.time_features : 8;
  cfg.attention = arch.attention;
  cfg.causal = false;
  return NetParams::init(cfg, seed);
}

std::pair<double, NetParams> denoiser_loss_grads(const NetParams& params, const IdMat& x0,
                                                 const NoiseSchedule& schedule,
                                                 std::uint64_t seed) {
  const int m = params.config.out_dim;
  const int T = schedule.T();
  const int i = Rng(seed).stream("time_index").uniform_int(T) + 1;
  const NoisyState xi = forward_sample(x0, schedule, i, m, seed);

  const auto cols = x0.cols();
  std::vector<TokenId> ids;
  std::vector<int> pos;
  ids.reserve(static_cast<std::size_t>(x0.size()));
  pos.reserve(static_cast<std::size_t>(x0.size()));
  for (Eigen::Index b = 0; b < x0.rows(); ++b) {
    for (Eigen::Index p = 0; p < cols; ++p) {
      ids.push_back(xi.ids(b, p));
      pos.push_back(static_cast<int>(p));
    }
  }
  ForwardCache cache = net_forward(params, std::move(ids), std::move(pos),
                                   static_cast<int>(cols), schedule.t_time(i));

  // The KL at a masked position reduces to a weighted cross-entropy on the
  // clean token: weight = (alpha_bar(i-1) - alpha_bar(i)) / (1 - alpha_bar(i)),
  // which is 1 at i = 1, covering the reconstruction term by the same formula.
  const double weight = (schedule.alpha_bar(i - 1) - schedule.alpha_bar(i)) /
                        (1.0 - schedule.alpha_bar(i));
  const double scale = static_cast<double>(T) * weight / static_cast<double>(x0.size());

  double loss = 0.0;
  Mat d_logits = Mat::Zero(cache.probs.rows(), cache.probs.cols());
  for (Eigen::Index b = 0; b < x0.rows(); ++b) {
    for (Eigen::Index p = 0; p < cols; ++p) {
      if (xi.ids(b, p) != m) continue;
      const Eigen::Index r = b * cols + p;
      const TokenId clean = x0(b, p);
      loss += scale * -std::log(cache.probs(r, clean));
      d_logits.row(r) = scale * cache.probs.row(r);
      d_logits(r, clean) -= scale;
    }
  }
  return {loss, net_backward(params, cache, d_logits)};
}

DenoiserTrainResult train_denoiser(const CorpusSplit& split, const Tokenizer& tok,
                                   const NoiseSchedule& schedule, const TrainConfig& config,
                                   const ModelArch& arch, const NetParams* resume_params,
                                   int start_step) {
  config.validate();
  require(schedule.fully_masking(), Errc::bad_t,
          "training schedule must mask fully at T");
  DenoiserTrainResult result;
  result.params = resume_params
                      ? *resume_params
                      : init_denoiser_params(tok.vocab.mask_id(), config.seq_len, arch,
                                             config.seed);
  if (config.steps == 0) return result;

  BatchStream stream(split, tok, config.batch_size, config.seq_len, config.seed);
  const Rng step_seeds = Rng(config.seed).stream("train_step");
  result.log = run_sgd(result.params, config, stream,
                       [&](const NetParams& p, const IdMat& batch, int step) {
                         Rng derived = step_seeds.stream(static_cast<std::uint64_t>(step));
                         return denoiser_loss_grads(p, batch, schedule, derived.next_u64());
                       },
                       start_step);
  return result;
}

double denoiser_grad_check(const NetParams& params, const IdMat& x0,
                           const NoiseSchedule& schedule, std::uint64_t seed,
                           double epsilon, int max_params) {
  NetParams work = params;
  const NetParams analytic = denoiser_loss_grads(work, x0, schedule, seed).second;
  return grad_check_core(
      work,
      [&](const NetParams& p) { return denoiser_loss_grads(p, x0, schedule, seed).first; },
      analytic, Rng(seed).stream("grad_check"), max_params, epsilon);
}

}  // namespace d3pmlab

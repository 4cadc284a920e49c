#include "d3pmlab/ar.hpp"

#include <cmath>

namespace d3pmlab {
namespace ar {
namespace {

struct Window {
  std::vector<TokenId> ids;
  std::vector<int> pos;
};

// Last min(context, |prefix|) tokens with window-local positions.
Window window_of(const std::vector<TokenId>& prefix, int context) {
  const auto len = static_cast<int>(prefix.size());
  const int k = std::min(context, len);
  Window w;
  w.ids.assign(prefix.end() - k, prefix.end());
  w.pos.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) w.pos[static_cast<std::size_t>(j)] = j;
  return w;
}

CategoricalDist last_row_dist(const NetParams& params, Window w) {
  const int k = static_cast<int>(w.ids.size());
  ForwardCache cache = net_forward(params, std::move(w.ids), std::move(w.pos), k, -1.0);
  return CategoricalDist(cache.probs.row(cache.probs.rows() - 1).transpose());
}

// Flattened (id, position) pairs for the position-wise fast path: the
// conditional at target p depends only on the previous token and the window
// slot it occupies.
std::pair<std::vector<TokenId>, std::vector<int>> flat_elements(const IdMat& batch,
                                                                TokenId sos_id,
                                                                int context) {
  std::vector<TokenId> ids;
  std::vector<int> pos;
  ids.reserve(static_cast<std::size_t>(batch.size()));
  pos.reserve(static_cast<std::size_t>(batch.size()));
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    for (Eigen::Index p = 0; p < batch.cols(); ++p) {
      ids.push_back(p == 0 ? sos_id : batch(b, p - 1));
      pos.push_back(std::min(static_cast<int>(p), context - 1));
    }
  }
  return {std::move(ids), std::move(pos)};
}

// Whole rows as causal attention groups: valid when rows never exceed the
// context, where window-local and in-row positions coincide.
std::pair<std::vector<TokenId>, std::vector<int>> grouped_elements(const IdMat& batch,
                                                                   TokenId sos_id) {
  std::vector<TokenId> ids;
  std::vector<int> pos;
  ids.reserve(static_cast<std::size_t>(batch.size()));
  pos.reserve(static_cast<std::size_t>(batch.size()));
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    for (Eigen::Index p = 0; p < batch.cols(); ++p) {
      ids.push_back(p == 0 ? sos_id : batch(b, p - 1));
      pos.push_back(static_cast<int>(p));
    }
  }
  return {std::move(ids), std::move(pos)};
}

bool fits_grouped(const NetParams& params, const IdMat& batch) {
  return params.config.attention && batch.cols() <= params.config.max_positions;
}

}  // namespace

NetParams init_ar_params(int vocab_size, const ModelArch& arch, std::uint64_t seed) {
  NetConfig cfg;
  cfg.vocab_in = vocab_size;
  cfg.out_dim = vocab_size;
  cfg.max_positions = arch.context;
  cfg.embed_dim = arch.embed_dim;
  cfg.hidden_dim = arch.hidden_dim;
  cfg.time_features = 0;
  cfg.attention = arch.attention;
  cfg.causal = arch.attention;
  return NetParams::init(cfg, seed);
}

CategoricalDist next_token_dist(const NetParams& params, const std::vector<TokenId>& prefix) {
  require(!prefix.empty(), Errc::empty_prefix, "prefix must contain at least SOS");
  return last_row_dist(params, window_of(prefix, params.config.max_positions));
}

double sequence_logprob(const NetParams& params, const std::vector<TokenId>& ids,
                        TokenId sos_id) {
  require(!ids.empty(), Errc::empty_prefix, "sequence is empty");
  require(ids[0] == sos_id, Errc::empty_prefix, "sequence must begin with SOS");
  if (ids.size() == 1) return 0.0;
  const auto body_len = static_cast<Eigen::Index>(ids.size()) - 1;
  IdMat body(1, body_len);
  for (Eigen::Index p = 0; p < body_len; ++p) body(0, p) = ids[static_cast<std::size_t>(p) + 1];
  const Mat probs = row_conditionals(params, body, sos_id);
  double logprob = 0.0;
  for (Eigen::Index p = 0; p < body_len; ++p) {
    logprob += std::log(probs(p, body(0, p)));
  }
  return logprob;
}

Mat row_conditionals(const NetParams& params, const IdMat& batch, TokenId sos_id) {
  require(batch.size() > 0, Errc::empty_input, "empty batch");
  const auto& cfg = params.config;
  if (!cfg.attention) {
    auto [ids, pos] = flat_elements(batch, sos_id, cfg.max_positions);
    ForwardCache cache =
        net_forward(params, std::move(ids), std::move(pos), static_cast<int>(batch.cols()), -1.0);
    return std::move(cache.probs);
  }
  if (fits_grouped(params, batch)) {
    auto [ids, pos] = grouped_elements(batch, sos_id);
    ForwardCache cache =
        net_forward(params, std::move(ids), std::move(pos), static_cast<int>(batch.cols()), -1.0);
    return std::move(cache.probs);
  }
  // Rows longer than the context: evaluate each position's truncated window.
  Mat probs(batch.rows() * batch.cols(), cfg.out_dim);
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    std::vector<TokenId> prefix = {sos_id};
    for (Eigen::Index p = 0; p < batch.cols(); ++p) {
      probs.row(b * batch.cols() + p) =
          last_row_dist(params, window_of(prefix, cfg.max_positions)).probs.transpose();
      prefix.push_back(batch(b, p));
    }
  }
  return probs;
}

std::vector<TokenId> sample_sequence(const NetParams& params, const Vocab& vocab,
                                     int max_len, double temperature, std::uint64_t seed) {
  require(max_len >= 1, Errc::bad_config, "max_len must be >= 1");
  require(temperature > 0.0, Errc::bad_config, "temperature must be positive");
  std::vector<TokenId> prefix = {vocab.sos_id()};
  std::vector<TokenId> body;
  Rng base = Rng(seed).stream("ar_sample");
  for (int step = 0; step < max_len; ++step) {
    const CategoricalDist dist = next_token_dist(params, prefix);
    TokenId tok;
    if (temperature < 1e-9) {
      Eigen::Index argmax = 0;
      dist.probs.maxCoeff(&argmax);
      tok = static_cast<TokenId>(argmax);
    } else {
      Vec logits = dist.probs.array().max(1e-300).log() / temperature;
      Vec weights = (logits.array() - logits.maxCoeff()).exp();
      weights = (dist.probs.array() > 0.0).select(weights, 0.0);
      Rng rng = base.stream(static_cast<std::uint64_t>(step));
      tok = static_cast<TokenId>(rng.categorical(weights));
    }
    if (tok == vocab.eos_id() || tok == vocab.endoftext_id()) break;
    body.push_back(tok);
    prefix.push_back(tok);
  }
  return body;
}

std::pair<double, NetParams> ar_loss_grads(const NetParams& params, const IdMat& batch,
                                           TokenId sos_id) {
  const auto& cfg = params.config;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  if (!cfg.attention || fits_grouped(params, batch)) {
    auto [ids, pos] = cfg.attention ? grouped_elements(batch, sos_id)
                                    : flat_elements(batch, sos_id, cfg.max_positions);
    ForwardCache cache =
        net_forward(params, std::move(ids), std::move(pos), static_cast<int>(batch.cols()), -1.0);
    double loss = 0.0;
    Mat d_logits = cache.probs * inv_n;
    for (Eigen::Index b = 0; b < batch.rows(); ++b) {
      for (Eigen::Index p = 0; p < batch.cols(); ++p) {
        const Eigen::Index r = b * batch.cols() + p;
        loss += inv_n * -std::log(cache.probs(r, batch(b, p)));
        d_logits(r, batch(b, p)) -= inv_n;
      }
    }
    return {loss, net_backward(params, cache, d_logits)};
  }

  // Long-row fallback: one truncated window per position.
  double loss = 0.0;
  NetParams grads = NetParams::zeros_like(cfg);
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    std::vector<TokenId> prefix = {sos_id};
    for (Eigen::Index p = 0; p < batch.cols(); ++p) {
      Window w = window_of(prefix, cfg.max_positions);
      const int k = static_cast<int>(w.ids.size());
      ForwardCache cache = net_forward(params, std::move(w.ids), std::move(w.pos), k, -1.0);
      const Eigen::Index last = cache.probs.rows() - 1;
      const TokenId target = batch(b, p);
      loss += inv_n * -std::log(cache.probs(last, target));
      Mat d_logits = Mat::Zero(cache.probs.rows(), cfg.out_dim);
      d_logits.row(last) = inv_n * cache.probs.row(last);
      d_logits(last, target) -= inv_n;
      grads.axpy(1.0, net_backward(params, cache, d_logits));
      prefix.push_back(target);
    }
  }
  return {loss, std::move(grads)};
}

ArTrainResult train_ar(const CorpusSplit& split, const Tokenizer& tok,
                       const TrainConfig& config, const ModelArch& arch,
                       const NetParams* resume_params, int start_step) {
  config.validate();
  ArTrainResult result;
  result.params = resume_params ? *resume_params
                                : init_ar_params(tok.vocab.size(), arch, config.seed);
  if (config.steps == 0) return result;

  BatchStream stream(split, tok, config.batch_size, config.seq_len, config.seed);
  const TokenId sos = tok.vocab.sos_id();
  result.log = run_sgd(result.params, config, stream,
                       [&](const NetParams& p, const IdMat& batch, int /*step*/) {
                         return ar_loss_grads(p, batch, sos);
                       },
                       start_step);
  return result;
}

double ar_grad_check(const NetParams& params, const IdMat& batch, TokenId sos_id,
                     std::uint64_t seed, double epsilon, int max_params) {
  NetParams work = params;
  const NetParams analytic = ar_loss_grads(work, batch, sos_id).second;
  return grad_check_core(
      work, [&](const NetParams& p) { return ar_loss_grads(p, batch, sos_id).first; },
      analytic, Rng(seed).stream("grad_check"), max_params, epsilon);
}

}  // namespace ar
}  // namespace d3pmlab

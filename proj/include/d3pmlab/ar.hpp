#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "d3pmlab/corpus.hpp"
#include "d3pmlab/denoiser.hpp"
#include "d3pmlab/net.hpp"
#include "d3pmlab/training.hpp"

namespace d3pmlab {
namespace ar {

// Same skeleton as the denoiser, causal and without time input. The output
// head covers the vocabulary only, so the mask state gets zero mass by
// construction. Conditionals consult at most the last `context` tokens,
// encoded with window-local positions, so prefixes agreeing on that window
// are indistinguishable.
NetParams init_ar_params(int vocab_size, const ModelArch& arch, std::uint64_t seed);

CategoricalDist next_token_dist(const NetParams& params, const std::vector<TokenId>& prefix);

// Sum of log-conditionals in nats over positions after the leading SOS.
double sequence_logprob(const NetParams& params, const std::vector<TokenId>& ids,
                        TokenId sos_id);

// Conditional distributions for every position of every row, with SOS
// implicitly prepended to each row. Row b*L + p is P(. | row b up to p-1).
Mat row_conditionals(const NetParams& params, const IdMat& batch, TokenId sos_id);

// Ancestral left-to-right sampling from SOS; returns the generated body
// (terminating EOS / end-of-text excluded). temperature -> 0 is greedy.
std::vector<TokenId> sample_sequence(const NetParams& params, const Vocab& vocab,
                                     int max_len, double temperature, std::uint64_t seed);

// Mean next-token cross-entropy over all positions of the batch.
std::pair<double, NetParams> ar_loss_grads(const NetParams& params, const IdMat& batch,
                                           TokenId sos_id);

struct ArTrainResult {
  NetParams params;
  TrainLog log;
};

ArTrainResult train_ar(const CorpusSplit& split, const Tokenizer& tok,
                       const TrainConfig& config, const ModelArch& arch,
                       const NetParams* resume_params = nullptr, int start_step = 0);

double ar_grad_check(const NetParams& params, const IdMat& batch, TokenId sos_id,
                     std::uint64_t seed, double epsilon, int max_params = 200);

}  // namespace ar
}  // namespace d3pmlab

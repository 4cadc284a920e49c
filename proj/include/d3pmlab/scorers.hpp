#pragma once

#include "d3pmlab/ar.hpp"
#include "d3pmlab/metrics.hpp"
#include "d3pmlab/nelbo.hpp"

namespace d3pmlab {

// Exact autoregressive NLL: sum of next-token log losses over the batch.
class ArScorer : public Scorer {
 public:
  ArScorer(const NetParams& params, TokenId sos_id) : params_(params), sos_id_(sos_id) {}

  double batch_nats(const IdMat& batch, std::int64_t /*batch_index*/) override {
    const Mat probs = ar::row_conditionals(params_, batch, sos_id_);
    double nats = 0.0;
    for (Eigen::Index b = 0; b < batch.rows(); ++b) {
      for (Eigen::Index p = 0; p < batch.cols(); ++p) {
        nats += -std::log(probs(b * batch.cols() + p, batch(b, p)));
      }
    }
    return nats;
  }

  std::string kind() const override { return "ar"; }

 private:
  const NetParams& params_;
  TokenId sos_id_;
};

// Variational bound as the NLL source: the D3PM number is the NELBO total,
// an upper bound on the true NLL, reported under the same budget and
// batching as the exact AR quantity.
class D3pmScorer : public Scorer {
 public:
  D3pmScorer(const Denoiser& denoiser, const NoiseSchedule& schedule, std::uint64_t seed)
      : denoiser_(denoiser), schedule_(schedule), seed_(seed) {}

  double batch_nats(const IdMat& batch, std::int64_t batch_index) override {
    const std::uint64_t batch_seed = Rng(seed_)
                                         .stream("eval_batch")
                                         .stream(static_cast<std::uint64_t>(batch_index))
                                         .next_u64();
    return nelbo_terms(batch, denoiser_, schedule_, batch_seed).total *
           static_cast<double>(batch.size());
  }

  std::string kind() const override { return "d3pm"; }

 private:
  const Denoiser& denoiser_;
  const NoiseSchedule& schedule_;
  std::uint64_t seed_;
};

}  // namespace d3pmlab

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "d3pmlab/corpus.hpp"
#include "d3pmlab/net.hpp"

namespace d3pmlab {

struct TrainConfig {
  int steps = 2000;
  double lr = 3e-4;
  int warmup = 100;
  int batch_size = 8;
  int seq_len = 64;
  std::uint64_t seed = 1;

  void validate() const {
    require(steps >= 0 && warmup >= 0 && lr > 0.0, Errc::bad_config,
            "training config must be positive");
    require(batch_size >= 1 && seq_len >= 2, Errc::bad_config, "bad batch shape");
  }
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  void write_csv(const std::filesystem::path& path) const;
};

// Linear warmup to the peak rate, then constant.
inline double lr_at(double peak, int warmup, int step) {
  if (warmup <= 0) return peak;
  return peak * std::min(1.0, static_cast<double>(step) / warmup);
}

// Plain gradient descent. step_fn(params, batch, step) returns
// (loss, gradients); the driver applies the update and keeps parameters
// float-representable. Batches are addressed by absolute step index, so a
// run resumed from start_step reproduces the uninterrupted run exactly.
template <typename StepFn>
TrainLog run_sgd(NetParams& params, const TrainConfig& config, BatchStream& stream,
                 StepFn&& step_fn, int start_step = 0) {
  config.validate();
  TrainLog log;
  for (int step = start_step + 1; step <= config.steps; ++step) {
    const IdMat batch = stream.batch_at(step - 1);
    const double lr = lr_at(config.lr, config.warmup, step);
    auto [loss, grads] = step_fn(params, batch, step);
    require(std::isfinite(loss), Errc::non_finite_loss,
            "training diverged at step " + std::to_string(step));
    params.axpy(-lr, grads);
    params.round_to_f32();
    log.rows.push_back({step, loss, lr});
  }
  return log;
}

}  // namespace d3pmlab

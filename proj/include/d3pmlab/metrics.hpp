#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "d3pmlab/corpus.hpp"
#include "d3pmlab/types.hpp"

namespace d3pmlab {

// Per-run evaluation record. nll is in nats/token; bpt and ppl are derived
// through the identities bpt = nll/ln 2 and ppl = exp(nll).
struct EvalReport {
  double nll = 0.0;
  double bpt = 0.0;
  double ppl = 0.0;
  std::int64_t token_count = 0;
  double wall_seconds = 0.0;
  double batches_per_sec = 0.0;
  std::uint64_t seed = 0;
  std::string model_kind;  // "ar" or "d3pm"

  void check_identities(double tol = 1e-9) const;
};

// Bits per character from per-character natural-log probabilities.
double bpc(const std::vector<double>& logprobs_base_e);

// Per-batch negative log likelihood source under evaluation. batch_nats
// returns the summed nats over all tokens of the batch.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double batch_nats(const IdMat& batch, std::int64_t batch_index) = 0;
  virtual std::string kind() const = 0;
};

// Scores batches until adding another would exceed the token budget. Only
// the scorer calls are timed, so batches/s measures model throughput.
EvalReport eval_model(Scorer& scorer, const CorpusSplit& split, const Tokenizer& tok,
                      int batch_size, int seq_len, std::int64_t token_budget,
                      std::uint64_t seed);

struct SeedAggregate {
  std::vector<EvalReport> reports;
  double mean_bpt = 0.0;
  double std_bpt = 0.0;  // population
};

SeedAggregate aggregate_seeds(const std::vector<EvalReport>& reports);

// Deterministic fields only; timing lives in timing_json so rerun artifacts
// stay byte-identical.
nlohmann::ordered_json report_json(const EvalReport& report);
nlohmann::ordered_json timing_json(const EvalReport& report);
nlohmann::ordered_json aggregate_json(const SeedAggregate& aggregate);

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path);

}  // namespace d3pmlab

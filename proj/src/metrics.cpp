#include "d3pmlab/metrics.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace d3pmlab {

void EvalReport::check_identities(double tol) const {
  require(std::abs(bpt * std::log(2.0) - nll) <= tol * std::max(1.0, std::abs(nll)),
          Errc::shape_mismatch, "bpt/nll identity violated");
  require(std::abs(ppl - std::exp(nll)) <= tol * std::max(1.0, ppl),
          Errc::shape_mismatch, "ppl/nll identity violated");
}

double bpc(const std::vector<double>& logprobs_base_e) {
  require(!logprobs_base_e.empty(), Errc::empty_input, "no character log-probabilities");
  double sum = 0.0;
  for (const double nats : logprobs_base_e) sum += -nats / std::log(2.0);
  return sum / static_cast<double>(logprobs_base_e.size());
}

EvalReport eval_model(Scorer& scorer, const CorpusSplit& split, const Tokenizer& tok,
                      int batch_size, int seq_len, std::int64_t token_budget,
                      std::uint64_t seed) {
  require(token_budget >= seq_len, Errc::bad_config,
          "token budget must cover at least one window");
  BatchStream stream(split, tok, batch_size, seq_len, seed);
  const std::int64_t per_batch = static_cast<std::int64_t>(batch_size) * seq_len;
  require(per_batch <= token_budget, Errc::too_short,
          "token budget below a single batch");

  double total_nats = 0.0;
  std::int64_t tokens = 0;
  std::int64_t batches = 0;
  double scoring_seconds = 0.0;
  while (tokens + per_batch <= token_budget) {
    const IdMat batch = stream.batch_at(batches);
    const auto started = std::chrono::steady_clock::now();
    total_nats += scorer.batch_nats(batch, batches);
    const auto finished = std::chrono::steady_clock::now();
    scoring_seconds += std::chrono::duration<double>(finished - started).count();
    tokens += per_batch;
    batches += 1;
  }

  EvalReport report;
  report.nll = total_nats / static_cast<double>(tokens);
  report.bpt = report.nll / std::log(2.0);
  report.ppl = std::exp(report.nll);
  report.token_count = tokens;
  report.wall_seconds = scoring_seconds;
  report.batches_per_sec =
      scoring_seconds > 0.0 ? static_cast<double>(batches) / scoring_seconds : 0.0;
  report.seed = seed;
  report.model_kind = scorer.kind();
  return report;
}

SeedAggregate aggregate_seeds(const std::vector<EvalReport>& reports) {
  require(!reports.empty(), Errc::empty_input, "no reports to aggregate");
  for (const auto& r : reports) {
    require(r.model_kind == reports.front().model_kind, Errc::mixed_kinds,
            "aggregate mixes model kinds");
  }
  SeedAggregate agg;
  agg.reports = reports;
  double sum = 0.0;
  for (const auto& r : reports) sum += r.bpt;
  agg.mean_bpt = sum / static_cast<double>(reports.size());
  double sq = 0.0;
  for (const auto& r : reports) sq += (r.bpt - agg.mean_bpt) * (r.bpt - agg.mean_bpt);
  agg.std_bpt = std::sqrt(sq / static_cast<double>(reports.size()));
  return agg;
}

nlohmann::ordered_json report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["model_kind"] = report.model_kind;
  j["seed"] = report.seed;
  j["nll"] = report.nll;
  j["bpt"] = report.bpt;
  j["ppl"] = report.ppl;
  j["token_count"] = report.token_count;
  return j;
}

nlohmann::ordered_json timing_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["wall_seconds"] = report.wall_seconds;
  j["batches_per_sec"] = report.batches_per_sec;
  return j;
}

nlohmann::ordered_json aggregate_json(const SeedAggregate& aggregate) {
  nlohmann::ordered_json j;
  j["model_kind"] = aggregate.reports.front().model_kind;
  j["mean_bpt"] = aggregate.mean_bpt;
  j["std_bpt"] = aggregate.std_bpt;
  auto& seeds = j["seeds"] = nlohmann::ordered_json::array();
  for (const auto& r : aggregate.reports) seeds.push_back(r.seed);
  auto& bpts = j["bpt"] = nlohmann::ordered_json::array();
  for (const auto& r : aggregate.reports) bpts.push_back(r.bpt);
  return j;
}

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::io_error, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  require(out.good(), Errc::io_error, "failed writing " + path.string());
}

}  // namespace d3pmlab

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "d3pmlab/config.hpp"
#include "d3pmlab/diffusion.hpp"
#include "d3pmlab/metrics.hpp"

namespace d3pmlab {

struct CellResult {
  std::string model;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::map<std::string, SeedAggregate> aggregates;
  std::string comparison_markdown;
  std::filesystem::path out_dir;
};

// Loads the experiment vocabulary, training it from the train split on first
// use and reusing the saved vocab.json afterwards.
Tokenizer ensure_tokenizer(const ExperimentConfig& config, const Corpus& corpus);

// Trains (or resumes) one (model, seed) cell under out/<name>/<model>/<seed>/
// and, when evaluate is set, writes report.json and timing.json.
CellResult run_cell(const ExperimentConfig& config, const Corpus& corpus,
                    const Tokenizer& tok, const std::string& model, std::uint64_t seed,
                    bool evaluate);

// Full protocol: every (model kind, seed) cell trained, checkpointed and
// evaluated with shared loaders and budgets; failures stay contained in
// their cell. Writes per-model aggregate.json and comparison.md.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Release-gate suites backed by the brute-force oracles.
struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using PosteriorFn = std::function<CategoricalDist(
    TokenId, const CategoricalDist&, const NoiseSchedule&, int, int, int)>;

SuiteResult verify_matrix_algebra();
SuiteResult verify_posterior();                        // production posterior
SuiteResult verify_posterior(const PosteriorFn& fn);   // injectable for tests
SuiteResult verify_nelbo();
SuiteResult verify_gradients();
SuiteResult verify_metric_identities();
SuiteResult verify_paper_tables();
SuiteResult verify_forward_stats();

std::vector<SuiteResult> verify();

}  // namespace d3pmlab

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "d3pmlab/corpus.hpp"
#include "d3pmlab/schedule.hpp"

namespace d3pmlab {

// Experiment description in dotted key=value form, one pair per line in the
// config file or via --set overrides. Keys follow the loader/model/sampling
// naming convention (model.length, sampling.steps, loader.batch_size, ...).
struct ExperimentConfig {
  std::string data_path;
  CorpusFormat data_format = CorpusFormat::plain;
  std::string eval_split = "valid";

  int vocab_size = 1024;

  std::vector<std::string> model_kinds = {"ar", "d3pm"};
  int seq_len = 64;   // model.length
  int context = 64;   // model.context
  int embed_dim = 32;
  int hidden_dim = 64;
  int time_features = 8;
  bool attention = false;

  int T = 1000;
  int sampling_steps = 1000;
  ScheduleKind schedule_kind = ScheduleKind::absorbing_uniform;

  int batch_size = 8;       // loader.batch_size
  int eval_batch_size = 4;  // loader.eval_batch_size
  std::int64_t token_budget = 100000;

  int train_steps = 2000;
  double lr = 3e-4;
  int warmup = 100;
  std::map<std::string, double> per_model_lr;  // optim.lr.ar / optim.lr.d3pm

  std::vector<std::uint64_t> seeds = {1};
  std::map<std::string, std::vector<std::uint64_t>> per_model_seeds;

  std::string out_root = "out";
  std::string name = "exp";
  int checkpoint_every = 0;  // 0: final checkpoint only

  static ExperimentConfig from_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  void apply_env_overrides();  // D3PMLAB_OUT replaces out_root
  void validate() const;

  std::filesystem::path experiment_dir() const;
  std::filesystem::path cell_dir(const std::string& model, std::uint64_t seed) const;
  std::vector<std::uint64_t> seeds_for(const std::string& model) const;
  double lr_for(const std::string& model) const;
};

}  // namespace d3pmlab

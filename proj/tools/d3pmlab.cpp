#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "d3pmlab/ar.hpp"
#include "d3pmlab/checkpoint.hpp"
#include "d3pmlab/denoiser.hpp"
#include "d3pmlab/harness.hpp"
#include "d3pmlab/scorers.hpp"

namespace {

using namespace d3pmlab;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file (key=value lines)");
  cmd->add_option("--set", opts.overrides, "override config entries, e.g. --set T=50")
      ->take_all();
  cmd->add_option("--seed", opts.seed, "run a single seed instead of the config list");
}

ExperimentConfig build_config(const CommonOpts& opts) {
  ExperimentConfig config;
  if (!opts.config_path.empty()) {
    config = ExperimentConfig::from_file(opts.config_path);
  }
  for (const auto& entry : opts.overrides) {
    const auto eq = entry.find('=');
    require(eq != std::string::npos, Errc::bad_config,
            "--set expects key=value, got '" + entry + "'");
    config.set(entry.substr(0, eq), entry.substr(eq + 1));
  }
  if (opts.seed) config.seeds = {*opts.seed};
  config.apply_env_overrides();
  return config;
}

std::pair<CheckpointMeta, NetParams> load_cell_checkpoint(const ExperimentConfig& config,
                                                          const std::string& model,
                                                          std::uint64_t seed) {
  const auto path = config.cell_dir(model, seed) / "checkpoint.bin";
  require(std::filesystem::exists(path), Errc::io_error,
          "no checkpoint at " + path.string() + " (train first)");
  return load_checkpoint(path);
}

int cmd_tokenizer_train(const CommonOpts& opts) {
  ExperimentConfig config = build_config(opts);
  config.validate();
  const Corpus corpus = load_corpus(config.data_path, config.data_format);
  std::filesystem::create_directories(config.experiment_dir());
  TrainBpeResult trained = train_bpe(corpus.train.documents, config.vocab_size);
  const auto path = config.experiment_dir() / "vocab.json";
  save_vocab_json(trained.tokenizer, path);
  std::cout << "wrote " << path.string() << " (" << trained.tokenizer.vocab.size()
            << " tokens";
  if (trained.truncated) {
    std::cout << "; corpus ran out of repeated pairs before "
              << config.vocab_size << ")";
  } else {
    std::cout << ")";
  }
  std::cout << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& model) {
  ExperimentConfig config = build_config(opts);
  config.validate();
  const Corpus corpus = load_corpus(config.data_path, config.data_format);
  const Tokenizer tok = ensure_tokenizer(config, corpus);
  bool all_ok = true;
  for (const std::uint64_t seed : config.seeds_for(model)) {
    const CellResult cell = run_cell(config, corpus, tok, model, seed, false);
    if (cell.ok) {
      std::cout << model << "/" << seed << ": trained " << config.train_steps
                << " steps -> " << config.cell_dir(model, seed).string() << "\n";
    } else {
      std::cout << model << "/" << seed << ": FAILED: " << cell.error << "\n";
      all_ok = false;
    }
  }
  return all_ok ? 0 : 3;
}

int cmd_eval(const CommonOpts& opts, const std::string& model) {
  ExperimentConfig config = build_config(opts);
  config.validate();
  const Corpus corpus = load_corpus(config.data_path, config.data_format);
  const Tokenizer tok = ensure_tokenizer(config, corpus);
  const CorpusSplit& split = corpus.split(config.eval_split == "train"  ? SplitName::train
                                          : config.eval_split == "test" ? SplitName::test
                                                                        : SplitName::valid);
  for (const std::uint64_t seed : config.seeds_for(model)) {
    auto [meta, params] = load_cell_checkpoint(config, model, seed);
    require(meta.vocab_hash == hash_hex(vocab_hash(tok)), Errc::bad_config,
            "checkpoint vocabulary does not match the experiment vocabulary");
    EvalReport report;
    if (model == "d3pm") {
      const NoiseSchedule schedule = build_schedule(config.schedule_kind, config.T);
      NeuralDenoiser denoiser(std::move(params));
      D3pmScorer scorer(denoiser, schedule, seed);
      report = eval_model(scorer, split, tok, config.eval_batch_size, config.seq_len,
                          config.token_budget, seed);
    } else {
      ArScorer scorer(params, tok.vocab.sos_id());
      report = eval_model(scorer, split, tok, config.eval_batch_size, config.seq_len,
                          config.token_budget, seed);
    }
    const auto dir = config.cell_dir(model, seed);
    std::filesystem::create_directories(dir);
    write_json(report_json(report), dir / "report.json");
    write_json(timing_json(report), dir / "timing.json");
    std::printf("%s seed=%llu  nll=%.4f  bpt=%.4f  ppl=%.4f  tokens=%lld  %.2f batches/s\n",
                model.c_str(), static_cast<unsigned long long>(seed), report.nll, report.bpt,
                report.ppl, static_cast<long long>(report.token_count),
                report.batches_per_sec);
  }
  return 0;
}

int cmd_sample(const CommonOpts& opts, const std::string& model, int count,
               double temperature, int max_len) {
  ExperimentConfig config = build_config(opts);
  config.validate();
  const Corpus corpus = load_corpus(config.data_path, config.data_format);
  const Tokenizer tok = ensure_tokenizer(config, corpus);
  const std::uint64_t seed = config.seeds_for(model).front();
  auto [meta, params] = load_cell_checkpoint(config, model, seed);

  if (model == "d3pm") {
    const NoiseSchedule schedule = build_schedule(config.schedule_kind, config.T);
    NeuralDenoiser denoiser(std::move(params));
    auto [ids, stats] = ancestral_sample(denoiser, schedule, count, config.seq_len,
                                         config.sampling_steps, seed);
    for (Eigen::Index b = 0; b < ids.rows(); ++b) {
      std::vector<TokenId> row(ids.row(b).begin(), ids.row(b).end());
      std::cout << decode(tok, row) << "\n";
      std::cout << std::string(80, '-') << "\n";
    }
    std::printf("%d steps, %.2f tokens/s, %.2f batches/s\n", stats.steps,
                stats.tokens_per_sec, stats.batches_per_sec);
  } else {
    for (int k = 0; k < count; ++k) {
      const auto body = ar::sample_sequence(params, tok.vocab, max_len, temperature,
                                            seed + static_cast<std::uint64_t>(k));
      std::cout << decode(tok, body) << "\n";
      std::cout << std::string(80, '-') << "\n";
    }
  }
  return 0;
}

int cmd_verify() {
  const auto suites = verify();
  bool all_passed = true;
  for (const auto& suite : suites) {
    std::cout << (suite.passed ? "PASS" : "FAIL") << "  " << suite.name << ": "
              << suite.detail << "\n";
    all_passed = all_passed && suite.passed;
  }
  return all_passed ? 0 : 1;
}

int cmd_compare(const CommonOpts& opts) {
  ExperimentConfig config = build_config(opts);
  config.validate();
  const ExperimentResult result = run_experiment(config);
  std::cout << result.comparison_markdown;
  std::cout << "\nartifacts under " << result.out_dir.string() << "\n";
  for (const auto& cell : result.cells) {
    if (!cell.ok) return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Absorbing-state discrete diffusion vs autoregressive language "
               "modeling toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string sample_model = "ar";
  int sample_count = 4;
  double sample_temperature = 1.0;
  int sample_max_len = 128;

  auto* tok_cmd = app.add_subcommand("tokenizer-train", "train the BPE vocabulary");
  add_common(tok_cmd, opts);
  auto* train_ar_cmd = app.add_subcommand("train-ar", "train the autoregressive model");
  add_common(train_ar_cmd, opts);
  auto* train_d3pm_cmd = app.add_subcommand("train-d3pm", "train the diffusion denoiser");
  add_common(train_d3pm_cmd, opts);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained checkpoint");
  add_common(eval_cmd, opts);
  eval_cmd->add_option("--model", sample_model, "ar or d3pm")->required();
  auto* sample_cmd = app.add_subcommand("sample", "generate text from a checkpoint");
  add_common(sample_cmd, opts);
  sample_cmd->add_option("--model", sample_model, "ar or d3pm")->required();
  sample_cmd->add_option("--count", sample_count, "sequences to generate");
  sample_cmd->add_option("--temperature", sample_temperature, "softmax temperature (ar)");
  sample_cmd->add_option("--max-len", sample_max_len, "generation cap (ar)");
  auto* verify_cmd = app.add_subcommand("verify", "run the oracle and invariant suites");
  auto* compare_cmd = app.add_subcommand("compare", "train and compare all configured models");
  add_common(compare_cmd, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (tok_cmd->parsed()) return cmd_tokenizer_train(opts);
    if (train_ar_cmd->parsed()) return cmd_train(opts, "ar");
    if (train_d3pm_cmd->parsed()) return cmd_train(opts, "d3pm");
    if (eval_cmd->parsed()) return cmd_eval(opts, sample_model);
    if (sample_cmd->parsed())
      return cmd_sample(opts, sample_model, sample_count, sample_temperature,
                        sample_max_len);
    if (verify_cmd->parsed()) return cmd_verify();
    if (compare_cmd->parsed()) return cmd_compare(opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::bad_config ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

#include "d3pmlab/harness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "d3pmlab/ar.hpp"
#include "d3pmlab/checkpoint.hpp"
#include "d3pmlab/denoiser.hpp"
#include "d3pmlab/oracles.hpp"
#include "d3pmlab/scorers.hpp"

namespace d3pmlab {
namespace {

SplitName split_from_name(const std::string& name) {
  if (name == "train") return SplitName::train;
  if (name == "valid") return SplitName::valid;
  return SplitName::test;
}

ModelArch arch_from_config(const ExperimentConfig& config) {
  ModelArch arch;
  arch.embed_dim = config.embed_dim;
  arch.hidden_dim = config.hidden_dim;
  arch.time_features = config.time_features;
  arch.attention = config.attention;
  arch.context = config.context;
  return arch;
}

void append_log_csv(const std::filesystem::path& path, const TrainLog& log,
                    bool fresh_run) {
  if (fresh_run) {
    log.write_csv(path);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  require(out.good(), Errc::io_error, "cannot open " + path.string());
  out << std::setprecision(17);
  for (const auto& row : log.rows) {
    out << row.step << ',' << row.loss << ',' << row.lr << ',' << row.step << '\n';
  }
}

// Train with periodic checkpoints so an interrupted cell resumes midway and
// still ends bit-identical to an uninterrupted run.
NetParams train_cell_model(const ExperimentConfig& config, const Corpus& corpus,
                           const Tokenizer& tok, const std::string& model,
                           std::uint64_t seed, const std::filesystem::path& dir) {
  TrainConfig tc;
  tc.steps = config.train_steps;
  tc.lr = config.lr_for(model);
  tc.warmup = config.warmup;
  tc.batch_size = config.batch_size;
  tc.seq_len = config.seq_len;
  tc.seed = seed;
  const ModelArch arch = arch_from_config(config);
  const NoiseSchedule schedule = build_schedule(config.schedule_kind, config.T);
  const std::string vhash = hash_hex(vocab_hash(tok));
  const auto ckpt_path = dir / "checkpoint.bin";
  const auto log_path = dir / "train_log.csv";

  NetParams params;
  int done = 0;
  if (std::filesystem::exists(ckpt_path)) {
    auto [meta, loaded] = load_checkpoint(ckpt_path);
    require(meta.kind == model, Errc::bad_config,
            "checkpoint kind " + meta.kind + " does not match cell " + model);
    require(meta.vocab_hash == vhash, Errc::bad_config,
            "checkpoint was trained with a different vocabulary");
    params = std::move(loaded);
    done = meta.step;
  } else if (model == "d3pm") {
    params = init_denoiser_params(tok.vocab.mask_id(), tc.seq_len, arch, seed);
  } else {
    params = ar::init_ar_params(tok.vocab.size(), arch, seed);
  }

  const bool fresh = done == 0;
  bool wrote_log = false;
  while (done < tc.steps) {
    const int stop = config.checkpoint_every > 0
                         ? std::min(tc.steps, done + config.checkpoint_every)
                         : tc.steps;
    TrainConfig segment = tc;
    segment.steps = stop;
    TrainLog log;
    if (model == "d3pm") {
      auto result = train_denoiser(corpus.train, tok, schedule, segment, arch, &params, done);
      params = std::move(result.params);
      log = std::move(result.log);
    } else {
      auto result = ar::train_ar(corpus.train, tok, segment, arch, &params, done);
      params = std::move(result.params);
      log = std::move(result.log);
    }
    append_log_csv(log_path, log, fresh && !wrote_log);
    wrote_log = true;

    CheckpointMeta meta;
    meta.kind = model;
    meta.step = stop;
    meta.vocab_hash = vhash;
    meta.schedule_kind = model == "d3pm" ? schedule_kind_str(config.schedule_kind) : "none";
    meta.T = model == "d3pm" ? config.T : 0;
    save_checkpoint(ckpt_path, meta, params);
    done = stop;
  }
  if (tc.steps == 0 && !std::filesystem::exists(ckpt_path)) {
    CheckpointMeta meta;
    meta.kind = model;
    meta.step = 0;
    meta.vocab_hash = vhash;
    meta.schedule_kind = model == "d3pm" ? schedule_kind_str(config.schedule_kind) : "none";
    meta.T = model == "d3pm" ? config.T : 0;
    save_checkpoint(ckpt_path, meta, params);
  }
  return params;
}

std::string format_fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

Tokenizer ensure_tokenizer(const ExperimentConfig& config, const Corpus& corpus) {
  const auto vocab_path = config.experiment_dir() / "vocab.json";
  if (std::filesystem::exists(vocab_path)) {
    return load_vocab_json(vocab_path);
  }
  std::filesystem::create_directories(config.experiment_dir());
  TrainBpeResult trained = train_bpe(corpus.train.documents, config.vocab_size);
  save_vocab_json(trained.tokenizer, vocab_path);
  return std::move(trained.tokenizer);
}

CellResult run_cell(const ExperimentConfig& config, const Corpus& corpus,
                    const Tokenizer& tok, const std::string& model, std::uint64_t seed,
                    bool evaluate) {
  CellResult cell;
  cell.model = model;
  cell.seed = seed;
  try {
    const auto dir = config.cell_dir(model, seed);
    std::filesystem::create_directories(dir);
    NetParams params = train_cell_model(config, corpus, tok, model, seed, dir);

    if (evaluate) {
      const CorpusSplit& split = corpus.split(split_from_name(config.eval_split));
      if (model == "d3pm") {
        const NoiseSchedule schedule = build_schedule(config.schedule_kind, config.T);
        NeuralDenoiser denoiser(std::move(params));
        D3pmScorer scorer(denoiser, schedule, seed);
        cell.report = eval_model(scorer, split, tok, config.eval_batch_size,
                                 config.seq_len, config.token_budget, seed);
      } else {
        ArScorer scorer(params, tok.vocab.sos_id());
        cell.report = eval_model(scorer, split, tok, config.eval_batch_size,
                                 config.seq_len, config.token_budget, seed);
      }
      write_json(report_json(cell.report), dir / "report.json");
      write_json(timing_json(cell.report), dir / "timing.json");
    }
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

ExperimentResult run_experiment(const ExperimentConfig& input) {
  ExperimentConfig config = input;
  config.apply_env_overrides();
  config.validate();

  const Corpus corpus = load_corpus(config.data_path, config.data_format);
  const Tokenizer tok = ensure_tokenizer(config, corpus);

  ExperimentResult result;
  result.out_dir = config.experiment_dir();
  for (const auto& model : config.model_kinds) {
    for (const std::uint64_t seed : config.seeds_for(model)) {
      result.cells.push_back(run_cell(config, corpus, tok, model, seed, true));
    }
  }

  for (const auto& model : config.model_kinds) {
    std::vector<EvalReport> reports;
    for (const auto& cell : result.cells) {
      if (cell.ok && cell.model == model) reports.push_back(cell.report);
    }
    if (reports.empty()) continue;
    SeedAggregate agg = aggregate_seeds(reports);
    write_json(aggregate_json(agg), result.out_dir / model / "aggregate.json");
    result.aggregates.emplace(model, std::move(agg));
  }

  std::ostringstream md;
  md << "| Model | Seed | BPT | NLL | PPL | Speed (batch/s) | Mean BPT |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& model : config.model_kinds) {
    bool first = true;
    for (const auto& cell : result.cells) {
      if (cell.model != model) continue;
      md << "| " << model << " | " << cell.seed << " | ";
      if (cell.ok) {
        md << format_fixed(cell.report.bpt, 4) << " | " << format_fixed(cell.report.nll, 4)
           << " | " << format_fixed(cell.report.ppl, 4) << " | "
           << format_fixed(cell.report.batches_per_sec, 2) << " | ";
      } else {
        md << "FAILED | FAILED | FAILED | FAILED | ";
      }
      const auto agg = result.aggregates.find(model);
      if (first && agg != result.aggregates.end()) {
        md << format_fixed(agg->second.mean_bpt, 5);
      }
      md << " |\n";
      first = false;
    }
  }
  for (const auto& cell : result.cells) {
    if (!cell.ok) {
      md << "\n- " << cell.model << "/" << cell.seed << " failed: " << cell.error << "\n";
    }
  }
  result.comparison_markdown = md.str();

  std::ofstream out(result.out_dir / "comparison.md", std::ios::binary);
  require(out.good(), Errc::io_error, "cannot write comparison.md");
  out << result.comparison_markdown;
  return result;
}

}  // namespace d3pmlab

#include "d3pmlab/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace d3pmlab {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    require(used == value.size(), Errc::bad_config, "");
    return v;
  } catch (...) {
    fail(Errc::bad_config, "key " + key + " expects an integer, got '" + value + "'");
  }
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(value, &used);
    require(used == value.size(), Errc::bad_config, "");
    return v;
  } catch (...) {
    fail(Errc::bad_config, "key " + key + " expects an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    require(used == value.size(), Errc::bad_config, "");
    return v;
  } catch (...) {
    fail(Errc::bad_config, "key " + key + " expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(Errc::bad_config, "key " + key + " expects true/false, got '" + value + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& value) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split_csv(value)) {
    try {
      seeds.push_back(std::stoull(part));
    } catch (...) {
      fail(Errc::bad_config, "key " + key + " expects seed integers, got '" + part + "'");
    }
  }
  require(!seeds.empty(), Errc::bad_config, "key " + key + " needs at least one seed");
  return seeds;
}

void check_model_name(const std::string& key, const std::string& model) {
  require(model == "ar" || model == "d3pm", Errc::bad_config,
          "key " + key + ": unknown model '" + model + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::bad_config, "cannot open config " + path.string());
  ExperimentConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::bad_config,
            path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "data.path") {
    data_path = value;
  } else if (key == "data.format") {
    if (value == "plain") {
      data_format = CorpusFormat::plain;
    } else if (value == "wikitext-nonraw") {
      data_format = CorpusFormat::wikitext_nonraw;
    } else {
      fail(Errc::bad_config, "data.format must be plain or wikitext-nonraw");
    }
  } else if (key == "eval.split") {
    require(value == "train" || value == "valid" || value == "test", Errc::bad_config,
            "eval.split must be train/valid/test");
    eval_split = value;
  } else if (key == "tokenizer.vocab_size") {
    vocab_size = parse_int(key, value);
  } else if (key == "model.kind" || key == "model.kinds") {
    model_kinds = split_csv(value);
    require(!model_kinds.empty(), Errc::bad_config, "model.kinds is empty");
    for (const auto& kind : model_kinds) check_model_name(key, kind);
  } else if (key == "model.length") {
    seq_len = parse_int(key, value);
  } else if (key == "model.context") {
    context = parse_int(key, value);
  } else if (key == "model.embed_dim") {
    embed_dim = parse_int(key, value);
  } else if (key == "model.hidden_dim") {
    hidden_dim = parse_int(key, value);
  } else if (key == "model.time_features") {
    time_features = parse_int(key, value);
  } else if (key == "model.attention") {
    attention = parse_bool(key, value);
  } else if (key == "T") {
    T = parse_int(key, value);
  } else if (key == "sampling.steps") {
    sampling_steps = parse_int(key, value);
  } else if (key == "schedule.kind") {
    schedule_kind = schedule_kind_from_str(value);
  } else if (key == "loader.batch_size") {
    batch_size = parse_int(key, value);
  } else if (key == "loader.eval_batch_size") {
    eval_batch_size = parse_int(key, value);
  } else if (key == "eval.token_budget") {
    token_budget = parse_i64(key, value);
  } else if (key == "train.steps") {
    train_steps = parse_int(key, value);
  } else if (key == "train.checkpoint_every") {
    checkpoint_every = parse_int(key, value);
  } else if (key == "optim.lr") {
    lr = parse_double(key, value);
  } else if (key.rfind("optim.lr.", 0) == 0) {
    const std::string model = key.substr(9);
    check_model_name(key, model);
    per_model_lr[model] = parse_double(key, value);
  } else if (key == "optim.warmup") {
    warmup = parse_int(key, value);
  } else if (key == "seed" || key == "seeds") {
    seeds = parse_seed_list(key, value);
  } else if (key.rfind("seeds.", 0) == 0) {
    const std::string model = key.substr(6);
    check_model_name(key, model);
    per_model_seeds[model] = parse_seed_list(key, value);
  } else if (key == "out.root") {
    out_root = value;
  } else if (key == "experiment.name") {
    name = value;
  } else {
    fail(Errc::bad_config, "unknown config key: " + key);
  }
}

void ExperimentConfig::apply_env_overrides() {
  if (const char* env = std::getenv("D3PMLAB_OUT"); env != nullptr && *env != '\0') {
    out_root = env;
  }
}

void ExperimentConfig::validate() const {
  require(!data_path.empty(), Errc::bad_config, "data.path is required");
  require(!model_kinds.empty(), Errc::bad_config, "model.kinds is empty");
  require(T >= sampling_steps && sampling_steps >= 1, Errc::bad_config,
          "need T >= sampling.steps >= 1");
  require(seq_len >= 2 && context >= 1, Errc::bad_config, "bad model.length/context");
  require(batch_size >= 1 && eval_batch_size >= 1, Errc::bad_config, "bad batch sizes");
  require(token_budget >= seq_len, Errc::bad_config, "token budget below one window");
  require(train_steps >= 0 && warmup >= 0 && lr > 0.0, Errc::bad_config,
          "bad optimizer settings");
  auto check_seeds = [](const std::vector<std::uint64_t>& list, const std::string& what) {
    require(!list.empty(), Errc::bad_config, what + " is empty");
    std::set<std::uint64_t> unique(list.begin(), list.end());
    require(unique.size() == list.size(), Errc::bad_config, what + " has duplicates");
  };
  check_seeds(seeds, "seeds");
  for (const auto& [model, list] : per_model_seeds) check_seeds(list, "seeds." + model);
}

std::filesystem::path ExperimentConfig::experiment_dir() const {
  return std::filesystem::path(out_root) / name;
}

std::filesystem::path ExperimentConfig::cell_dir(const std::string& model,
                                                 std::uint64_t seed) const {
  return experiment_dir() / model / std::to_string(seed);
}

std::vector<std::uint64_t> ExperimentConfig::seeds_for(const std::string& model) const {
  const auto it = per_model_seeds.find(model);
  return it != per_model_seeds.end() ? it->second : seeds;
}

double ExperimentConfig::lr_for(const std::string& model) const {
  const auto it = per_model_lr.find(model);
  return it != per_model_lr.end() ? it->second : lr;
}

}  // namespace d3pmlab

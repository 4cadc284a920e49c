#include "d3pmlab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "d3pmlab/rng.hpp"

namespace d3pmlab {
namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (b < 0x80) {
      len = 1;
    } else if ((b & 0xE0) == 0xC0 && b >= 0xC2) {
      len = 2;
    } else if ((b & 0xF0) == 0xE0) {
      len = 3;
    } else if ((b & 0xF8) == 0xF0 && b <= 0xF4) {
      len = 4;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += len;
  }
  return true;
}

bool blank_line(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::missing_split, "cannot open split file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// Documents are maximal runs of non-blank lines. Heading markup and other
// in-line artifacts are content, not structure, and are kept verbatim.
std::vector<std::string> parse_documents(const std::string& text,
                                         const std::filesystem::path& origin) {
  require(valid_utf8(text), Errc::encoding_error, "invalid UTF-8 in " + origin.string());
  std::vector<std::string> docs;
  std::string current;
  std::istringstream lines(text);
  std::string line;
  auto flush = [&] {
    if (!blank_line(current)) docs.push_back(current);
    current.clear();
  };
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank_line(line)) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current += line;
    }
  }
  flush();
  return docs;
}

std::filesystem::path split_path(const std::filesystem::path& dir, CorpusFormat format,
                                 SplitName name) {
  const std::string split = split_name_str(name);
  if (format == CorpusFormat::plain) {
    return dir / (split + ".txt");
  }
  // wikitext layout: <stem>.<split>.tokens with a corpus-dependent stem.
  const std::string suffix = "." + split + ".tokens";
  if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const std::string fname = entry.path().filename().string();
      if (fname.size() > suffix.size() &&
          fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return entry.path();
      }
    }
  }
  fail(Errc::missing_split, "no *" + suffix + " file under " + dir.string());
}

CorpusSplit load_split(const std::filesystem::path& dir, CorpusFormat format,
                       SplitName name) {
  const auto path = split_path(dir, format, name);
  require(std::filesystem::exists(path), Errc::missing_split, "missing " + path.string());
  CorpusSplit split;
  split.name = name;
  split.documents = parse_documents(read_file(path), path);
  require(!split.documents.empty(), Errc::empty_corpus,
          "split " + std::string(split_name_str(name)) + " has no documents (" +
              path.string() + ")");
  return split;
}

}  // namespace

const char* split_name_str(SplitName name) {
  switch (name) {
    case SplitName::train: return "train";
    case SplitName::valid: return "valid";
    case SplitName::test: return "test";
  }
  return "?";
}

const CorpusSplit& Corpus::split(SplitName name) const {
  switch (name) {
    case SplitName::train: return train;
    case SplitName::valid: return valid;
    case SplitName::test: return test;
  }
  return train;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  require(std::filesystem::exists(path), Errc::missing_split,
          "corpus path does not exist: " + path.string());
  Corpus corpus;
  corpus.train = load_split(path, format, SplitName::train);
  corpus.valid = load_split(path, format, SplitName::valid);
  corpus.test = load_split(path, format, SplitName::test);
  return corpus;
}

BatchStream::BatchStream(const CorpusSplit& split, const Tokenizer& tok, int batch_size,
                         int seq_len, std::uint64_t seed)
    : batch_size_(batch_size), seq_len_(seq_len), seed_(seed) {
  require(batch_size >= 1, Errc::bad_config, "batch size must be >= 1");
  require(seq_len >= 2, Errc::bad_config, "context length must be >= 2");
  const TokenId eot = tok.vocab.endoftext_id();
  for (const auto& doc : split.documents) {
    const auto ids = encode(tok, doc);
    ids_.insert(ids_.end(), ids.begin(), ids.end());
    ids_.push_back(eot);
  }
  windows_ = static_cast<std::int64_t>(ids_.size()) / seq_len_;
  require(windows_ >= 1, Errc::too_short,
          "corpus yields zero full windows at L=" + std::to_string(seq_len_));
  ids_.resize(static_cast<std::size_t>(windows_ * seq_len_));
}

const std::vector<std::int64_t>& BatchStream::epoch_order(std::int64_t epoch) const {
  if (epoch != cached_epoch_) {
    order_cache_.assign(static_cast<std::size_t>(windows_), 0);
    std::iota(order_cache_.begin(), order_cache_.end(), std::int64_t{0});
    Rng rng = Rng(seed_).stream("shuffle").stream(static_cast<std::uint64_t>(epoch));
    rng.shuffle(order_cache_);
    cached_epoch_ = epoch;
  }
  return order_cache_;
}

IdMat BatchStream::batch_at(std::int64_t step) const {
  const std::int64_t per_epoch = batches_per_epoch();
  require(per_epoch >= 1, Errc::too_short,
          "window count " + std::to_string(windows_) + " is below batch size");
  const std::int64_t epoch = step / per_epoch;
  const std::int64_t slot = step % per_epoch;
  const auto& order = epoch_order(epoch);
  IdMat batch(batch_size_, seq_len_);
  for (int b = 0; b < batch_size_; ++b) {
    const std::int64_t w = order[static_cast<std::size_t>(slot * batch_size_ + b)];
    for (int p = 0; p < seq_len_; ++p) {
      batch(b, p) = ids_[static_cast<std::size_t>(w * seq_len_ + p)];
    }
  }
  return batch;
}

std::optional<IdMat> BatchStream::next() {
  if (cursor_ >= batches_per_epoch()) return std::nullopt;
  return batch_at(cursor_++);
}

}  // namespace d3pmlab

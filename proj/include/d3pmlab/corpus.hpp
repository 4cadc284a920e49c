#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "d3pmlab/tokenizer.hpp"
#include "d3pmlab/types.hpp"

namespace d3pmlab {

enum class SplitName { train, valid, test };
enum class CorpusFormat { plain, wikitext_nonraw };

const char* split_name_str(SplitName name);

struct CorpusSplit {
  SplitName name = SplitName::train;
  std::vector<std::string> documents;  // UTF-8, non-blank
};

struct Corpus {
  CorpusSplit train, valid, test;

  const CorpusSplit& split(SplitName name) const;
};

// plain: <dir>/{train,valid,test}.txt, blank-line-separated documents.
// wikitext-nonraw: <dir>/<stem>.{train,valid,test}.tokens.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

// Tokenized split flattened into L-token windows: documents are concatenated
// with an end-of-text id after each one, then cut into full windows. The
// window order and batch contents are a pure function of
// (documents, vocabulary, B, L, seed), so a stream can be replayed or
// resumed from any step.
class BatchStream {
 public:
  BatchStream(const CorpusSplit& split, const Tokenizer& tok, int batch_size,
              int seq_len, std::uint64_t seed);

  // Batch for an absolute step index; steps beyond one epoch reshuffle with a
  // seed derived from the epoch number.
  IdMat batch_at(std::int64_t step) const;

  // Single-epoch iterator: yields batches_per_epoch() batches then empty.
  std::optional<IdMat> next();
  void reset() { cursor_ = 0; }

  std::int64_t window_count() const { return static_cast<std::int64_t>(windows_); }
  std::int64_t batches_per_epoch() const { return windows_ / batch_size_; }
  std::int64_t tokens_per_epoch() const { return window_count() * seq_len_; }

 private:
  const std::vector<std::int64_t>& epoch_order(std::int64_t epoch) const;

  mutable std::vector<std::int64_t> order_cache_;
  mutable std::int64_t cached_epoch_ = -1;
  std::vector<TokenId> ids_;
  std::int64_t windows_ = 0;
  int batch_size_;
  int seq_len_;
  std::uint64_t seed_;
  std::int64_t cursor_ = 0;
};

}  // namespace d3pmlab

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d3pmlab/types.hpp"

namespace d3pmlab {

// Special tokens are ordinary vocabulary entries; the mask index is not. It
// is the augmented state one past the last real id, so mask_id == vocab size
// by construction and encode can never produce it.
struct Specials {
  TokenId sos_id = 0;
  TokenId eos_id = 1;
  TokenId endoftext_id = 2;
  TokenId mask_id = 0;  // always vocab_size; stored for serialization
};

class Vocab {
 public:
  Vocab() = default;

  // Specials followed by the 256 byte-level base tokens.
  static Vocab with_base_bytes();

  // Specials followed by the given token strings (raw text, mapped into the
  // byte-unicode alphabet internally). For small hand-built vocabularies.
  static Vocab from_tokens(const std::vector<std::string>& real_tokens);

  TokenId add_token(const std::string& token);
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }
  TokenId id_of(const std::string& token) const;

  int size() const { return static_cast<int>(id_to_token_.size()); }
  TokenId mask_id() const { return size(); }
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  Specials specials() const {
    Specials s = specials_;
    s.mask_id = mask_id();
    return s;
  }
  TokenId sos_id() const { return specials_.sos_id; }
  TokenId eos_id() const { return specials_.eos_id; }
  TokenId endoftext_id() const { return specials_.endoftext_id; }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, TokenId> token_to_id_;
  Specials specials_;
};

using MergeRule = std::pair<std::string, std::string>;

struct Tokenizer {
  Vocab vocab;
  std::vector<MergeRule> merges;

  void rebuild_ranks();
  const std::map<MergeRule, int>& ranks() const { return ranks_; }

 private:
  std::map<MergeRule, int> ranks_;
};

struct TrainBpeResult {
  Tokenizer tokenizer;
  // True when the corpus ran out of repeated pairs before the requested
  // vocabulary size was reached; the smaller vocabulary is still usable.
  bool truncated = false;
};

TrainBpeResult train_bpe(const std::vector<std::string>& documents, int target_vocab_size);

std::vector<TokenId> encode(const Tokenizer& tok, std::string_view text);
std::string decode(const Tokenizer& tok, const std::vector<TokenId>& ids);

std::string vocab_json_string(const Tokenizer& tok);
void save_vocab_json(const Tokenizer& tok, const std::filesystem::path& path);
Tokenizer load_vocab_json(const std::filesystem::path& path);
std::uint64_t vocab_hash(const Tokenizer& tok);

namespace bpe_detail {
// Byte-to-printable-codepoint bijection (the convention that renders a word
// boundary space as 'Ġ'). Exposed for tests.
std::string map_bytes(std::string_view raw);
std::string unmap_bytes(std::string_view mapped);
std::vector<std::string_view> chunk_text(std::string_view text);
}  // namespace bpe_detail

}  // namespace d3pmlab

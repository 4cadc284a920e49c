#include "d3pmlab/tokenizer.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "d3pmlab/rng.hpp"

namespace d3pmlab {
namespace bpe_detail {
namespace {

constexpr const char* kSosToken = "<sos>";
constexpr const char* kEosToken = "<eos>";
constexpr const char* kEndOfTextToken = "<|endoftext|>";

bool is_ascii_ws(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Printable bytes keep their own codepoint; the rest are remapped above 0xFF
// in byte order. Space (0x20) lands on U+0120 'Ġ'.
const std::array<std::uint32_t, 256>& byte_to_cp() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    auto printable = [](int b) {
      return (b >= 0x21 && b <= 0x7E) || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
    };
    std::uint32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      t[static_cast<std::size_t>(b)] = printable(b) ? static_cast<std::uint32_t>(b) : next++;
    }
    return t;
  }();
  return table;
}

const std::map<std::uint32_t, unsigned char>& cp_to_byte() {
  static const std::map<std::uint32_t, unsigned char> table = [] {
    std::map<std::uint32_t, unsigned char> t;
    const auto& fwd = byte_to_cp();
    for (int b = 0; b < 256; ++b) {
      t.emplace(fwd[static_cast<std::size_t>(b)], static_cast<unsigned char>(b));
    }
    return t;
  }();
  return table;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one codepoint starting at i; advances i.
std::uint32_t next_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && i + 1 < s.size()) {
    const auto b1 = static_cast<unsigned char>(s[i + 1]);
    i += 2;
    return (static_cast<std::uint32_t>(b0 & 0x1F) << 6) | (b1 & 0x3F);
  }
  if ((b0 & 0xF0) == 0xE0 && i + 2 < s.size()) {
    const auto b1 = static_cast<unsigned char>(s[i + 1]);
    const auto b2 = static_cast<unsigned char>(s[i + 2]);
    i += 3;
    return (static_cast<std::uint32_t>(b0 & 0x0F) << 12) |
           (static_cast<std::uint32_t>(b1 & 0x3F) << 6) | (b2 & 0x3F);
  }
  fail(Errc::encoding_error, "malformed UTF-8 in token string");
}

}  // namespace

std::string map_bytes(std::string_view raw) {
  std::string out;
  out.reserve(raw.size() * 2);
  const auto& table = byte_to_cp();
  for (const char c : raw) {
    append_utf8(out, table[static_cast<unsigned char>(c)]);
  }
  return out;
}

std::string unmap_bytes(std::string_view mapped) {
  std::string out;
  out.reserve(mapped.size());
  const auto& table = cp_to_byte();
  std::size_t i = 0;
  while (i < mapped.size()) {
    const std::uint32_t cp = next_utf8(mapped, i);
    const auto it = table.find(cp);
    require(it != table.end(), Errc::encoding_error, "codepoint outside the byte alphabet");
    out.push_back(static_cast<char>(it->second));
  }
  return out;
}

// Splits text into merge-isolated chunks: a single space fuses with the word
// it precedes, any other whitespace run stands alone. Concatenating the
// chunks reproduces the input byte for byte.
std::vector<std::string_view> chunk_text(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' && i + 1 < n && !is_ascii_ws(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t j = i + 1;
      while (j < n && !is_ascii_ws(static_cast<unsigned char>(text[j]))) ++j;
      chunks.push_back(text.substr(i, j - i));
      i = j;
    } else if (!is_ascii_ws(c)) {
      std::size_t j = i;
      while (j < n && !is_ascii_ws(static_cast<unsigned char>(text[j]))) ++j;
      chunks.push_back(text.substr(i, j - i));
      i = j;
    } else {
      std::size_t j = i;
      while (j < n && is_ascii_ws(static_cast<unsigned char>(text[j]))) ++j;
      if (j < n && text[j - 1] == ' ' && j - i > 1) --j;  // leave the space for the word
      if (j == i) ++j;
      chunks.push_back(text.substr(i, j - i));
      i = j;
    }
  }
  return chunks;
}

}  // namespace bpe_detail

using bpe_detail::chunk_text;
using bpe_detail::map_bytes;
using bpe_detail::unmap_bytes;

Vocab Vocab::with_base_bytes() {
  Vocab v;
  v.specials_.sos_id = v.add_token(bpe_detail::kSosToken);
  v.specials_.eos_id = v.add_token(bpe_detail::kEosToken);
  v.specials_.endoftext_id = v.add_token(bpe_detail::kEndOfTextToken);
  for (int b = 0; b < 256; ++b) {
    v.add_token(map_bytes(std::string(1, static_cast<char>(b))));
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& real_tokens) {
  Vocab v;
  v.specials_.sos_id = v.add_token(bpe_detail::kSosToken);
  v.specials_.eos_id = v.add_token(bpe_detail::kEosToken);
  v.specials_.endoftext_id = v.add_token(bpe_detail::kEndOfTextToken);
  for (const auto& t : real_tokens) {
    v.add_token(map_bytes(t));
  }
  return v;
}

TokenId Vocab::add_token(const std::string& token) {
  require(token_to_id_.count(token) == 0, Errc::encoding_error,
          "duplicate token string: " + token);
  const auto id = static_cast<TokenId>(id_to_token_.size());
  id_to_token_.push_back(token);
  token_to_id_.emplace(token, id);
  return id;
}

TokenId Vocab::id_of(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  require(it != token_to_id_.end(), Errc::encoding_error, "token not in vocabulary: " + token);
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  require(id >= 0 && id < size(), Errc::unknown_id, "token id out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

void Tokenizer::rebuild_ranks() {
  ranks_.clear();
  for (std::size_t r = 0; r < merges.size(); ++r) {
    ranks_.emplace(merges[r], static_cast<int>(r));
  }
}

namespace {

// Symbol sequences are vectors of mapped codepoint strings.
std::vector<std::string> split_symbols(std::string_view mapped) {
  std::vector<std::string> syms;
  std::size_t i = 0;
  while (i < mapped.size()) {
    const std::size_t start = i;
    bpe_detail::next_utf8(mapped, i);
    syms.emplace_back(mapped.substr(start, i - start));
  }
  return syms;
}

void apply_merge(std::vector<std::string>& syms, const MergeRule& rule) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < syms.size();) {
    if (r + 1 < syms.size() && syms[r] == rule.first && syms[r + 1] == rule.second) {
      syms[w] = rule.first + rule.second;
      r += 2;
    } else {
      if (w != r) syms[w] = std::move(syms[r]);
      r += 1;
    }
    ++w;
  }
  syms.resize(w);
}

}  // namespace

TrainBpeResult train_bpe(const std::vector<std::string>& documents, int target_vocab_size) {
  Vocab base = Vocab::with_base_bytes();
  require(target_vocab_size > base.size(), Errc::bad_config,
          "target vocab size must exceed " + std::to_string(base.size()) +
              " (bytes + specials)");

  // Unique chunks with frequencies, in first-seen order for determinism.
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> chunks;
  std::map<std::string, std::size_t> chunk_index;
  for (const auto& doc : documents) {
    for (const auto piece : chunk_text(doc)) {
      const std::string mapped = map_bytes(piece);
      const auto it = chunk_index.find(mapped);
      if (it == chunk_index.end()) {
        chunk_index.emplace(mapped, chunks.size());
        chunks.emplace_back(split_symbols(mapped), 1);
      } else {
        chunks[it->second].second += 1;
      }
    }
  }

  Tokenizer tok;
  tok.vocab = std::move(base);
  const int num_merges = target_vocab_size - tok.vocab.size();
  std::set<MergeRule> rejected;

  for (int round = 0; round < num_merges; ++round) {
    std::map<MergeRule, std::int64_t> pair_counts;
    for (const auto& [syms, count] : chunks) {
      for (std::size_t k = 0; k + 1 < syms.size(); ++k) {
        pair_counts[{syms[k], syms[k + 1]}] += count;
      }
    }
    MergeRule best;
    std::int64_t best_count = 0;
    for (const auto& [rule, count] : pair_counts) {
      if (rejected.count(rule)) continue;
      if (tok.vocab.contains(rule.first + rule.second)) {
        rejected.insert(rule);  // would break the string<->id bijection
        continue;
      }
      if (count > best_count) {  // map order breaks ties lexicographically
        best = rule;
        best_count = count;
      }
    }
    if (best_count < 2) break;

    tok.vocab.add_token(best.first + best.second);
    tok.merges.push_back(best);
    for (auto& [syms, count] : chunks) {
      apply_merge(syms, best);
    }
  }

  tok.rebuild_ranks();
  const bool truncated = static_cast<int>(tok.merges.size()) < num_merges;
  return TrainBpeResult{std::move(tok), truncated};
}

std::vector<TokenId> encode(const Tokenizer& tok, std::string_view text) {
  std::vector<TokenId> ids;
  const auto& ranks = tok.ranks();
  for (const auto piece : chunk_text(text)) {
    std::vector<std::string> syms = split_symbols(map_bytes(piece));
    while (syms.size() > 1) {
      int best_rank = -1;
      MergeRule best;
      for (std::size_t k = 0; k + 1 < syms.size(); ++k) {
        const auto it = ranks.find({syms[k], syms[k + 1]});
        if (it != ranks.end() && (best_rank < 0 || it->second < best_rank)) {
          best_rank = it->second;
          best = it->first;
        }
      }
      if (best_rank < 0) break;
      apply_merge(syms, best);
    }
    for (const auto& s : syms) {
      ids.push_back(tok.vocab.id_of(s));
    }
  }
  return ids;
}

std::string decode(const Tokenizer& tok, const std::vector<TokenId>& ids) {
  const TokenId mask = tok.vocab.mask_id();
  std::string mapped;
  for (const TokenId id : ids) {
    require(id != mask, Errc::mask_in_output, "mask id in decode input");
    require(id >= 0 && id <= mask, Errc::unknown_id,
            "id " + std::to_string(id) + " exceeds vocabulary");
    mapped += tok.vocab.token(id);
  }
  return unmap_bytes(mapped);
}

std::string vocab_json_string(const Tokenizer& tok) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["tokens"] = tok.vocab.tokens();
  const Specials sp = tok.vocab.specials();
  j["specials"] = {{"sos_id", sp.sos_id},
                   {"eos_id", sp.eos_id},
                   {"endoftext_id", sp.endoftext_id},
                   {"mask_id", sp.mask_id}};
  auto& merges = j["merges"] = nlohmann::ordered_json::array();
  for (const auto& [l, r] : tok.merges) {
    merges.push_back({l, r});
  }
  return j.dump(2);
}

void save_vocab_json(const Tokenizer& tok, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::io_error, "cannot open " + path.string() + " for writing");
  out << vocab_json_string(tok) << '\n';
  require(out.good(), Errc::io_error, "failed writing " + path.string());
}

Tokenizer load_vocab_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_error, "invalid vocab json: " + std::string(e.what()));
  }
  Tokenizer tok;
  for (const auto& t : j.at("tokens")) {
    tok.vocab.add_token(t.get<std::string>());
  }
  const auto& sp = j.at("specials");
  require(sp.at("sos_id").get<TokenId>() == tok.vocab.sos_id() &&
              sp.at("eos_id").get<TokenId>() == tok.vocab.eos_id() &&
              sp.at("endoftext_id").get<TokenId>() == tok.vocab.endoftext_id(),
          Errc::io_error, "special token ids do not match token order");
  require(sp.at("mask_id").get<TokenId>() == tok.vocab.mask_id(), Errc::io_error,
          "mask_id must equal vocabulary size");
  for (const auto& m : j.at("merges")) {
    tok.merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
  }
  tok.rebuild_ranks();
  return tok;
}

std::uint64_t vocab_hash(const Tokenizer& tok) {
  return Rng::fnv1a64(vocab_json_string(tok));
}

}  // namespace d3pmlab

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "d3pmlab/corpus.hpp"

using namespace d3pmlab;
namespace fs = std::filesystem;

namespace {

struct TempCorpusDir {
  fs::path dir;
  TempCorpusDir() {
    dir = fs::temp_directory_path() /
          ("d3pmlab_corpus_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~TempCorpusDir() { fs::remove_all(dir); }
  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
  }
  static inline int counter = 0;
};

Tokenizer toy_tokenizer() {
  Tokenizer tok;
  tok.vocab = Vocab::from_tokens({"a", "b", "c", "d"});
  tok.rebuild_ranks();
  return tok;
}

}  // namespace

TEST_CASE("plain corpus with one-line splits") {
  TempCorpusDir tmp;
  tmp.write("train.txt", "hello world\n");
  tmp.write("valid.txt", "validation line\n");
  tmp.write("test.txt", "test line\n");
  const Corpus corpus = load_corpus(tmp.dir, CorpusFormat::plain);
  CHECK(corpus.train.documents.size() == 1);
  CHECK(corpus.valid.documents.size() == 1);
  CHECK(corpus.test.documents.size() == 1);
}

TEST_CASE("heading markup stays inside the document") {
  TempCorpusDir tmp;
  tmp.write("train.txt", "= Title =\nBody.\n");
  tmp.write("valid.txt", "v\n");
  tmp.write("test.txt", "t\n");
  const Corpus corpus = load_corpus(tmp.dir, CorpusFormat::plain);
  REQUIRE(corpus.train.documents.size() == 1);
  CHECK(corpus.train.documents[0] == "= Title =\nBody.");
}

TEST_CASE("blank lines separate documents") {
  TempCorpusDir tmp;
  tmp.write("train.txt", "one\n\ntwo\nlines\n\n\nthree\n");
  tmp.write("valid.txt", "v\n");
  tmp.write("test.txt", "t\n");
  const Corpus corpus = load_corpus(tmp.dir, CorpusFormat::plain);
  REQUIRE(corpus.train.documents.size() == 3);
  CHECK(corpus.train.documents[1] == "two\nlines");
}

TEST_CASE("empty train split is an error") {
  TempCorpusDir tmp;
  tmp.write("train.txt", "");
  tmp.write("valid.txt", "v\n");
  tmp.write("test.txt", "t\n");
  try {
    load_corpus(tmp.dir, CorpusFormat::plain);
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_corpus);
  }
}

TEST_CASE("missing split file is an error") {
  TempCorpusDir tmp;
  tmp.write("train.txt", "x\n");
  tmp.write("valid.txt", "v\n");
  try {
    load_corpus(tmp.dir, CorpusFormat::plain);
    FAIL("expected MissingSplit");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::missing_split);
  }
}

TEST_CASE("invalid UTF-8 is an error") {
  TempCorpusDir tmp;
  tmp.write("train.txt", std::string("ok \xFF\xFE bad\n"));
  tmp.write("valid.txt", "v\n");
  tmp.write("test.txt", "t\n");
  try {
    load_corpus(tmp.dir, CorpusFormat::plain);
    FAIL("expected EncodingError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::encoding_error);
  }
}

TEST_CASE("wikitext layout resolves the stem") {
  TempCorpusDir tmp;
  tmp.write("wiki.train.tokens", " = Heading = \n body text \n");
  tmp.write("wiki.valid.tokens", "v\n");
  tmp.write("wiki.test.tokens", "t\n");
  const Corpus corpus = load_corpus(tmp.dir, CorpusFormat::wikitext_nonraw);
  CHECK(corpus.train.documents.size() == 1);
}

TEST_CASE("ten windows at batch size four give two batches") {
  // One document of 10*L - 1 tokens plus the end-of-text separator.
  const int L = 8;
  CorpusSplit split{SplitName::train, {std::string(10 * L - 1, 'a')}};
  BatchStream stream(split, toy_tokenizer(), 4, L, 1);
  CHECK(stream.window_count() == 10);
  CHECK(stream.batches_per_epoch() == 2);
  CHECK(stream.tokens_per_epoch() == 10 * L);
  int batches = 0;
  while (auto batch = stream.next()) {
    CHECK(batch->rows() == 4);
    CHECK(batch->cols() == L);
    ++batches;
  }
  CHECK(batches == 2);
}

TEST_CASE("identical inputs give byte-identical streams") {
  CorpusSplit split{SplitName::train, {"abcdabcdabcdabcd", "ddddcccc"}};
  BatchStream a(split, toy_tokenizer(), 2, 4, 99);
  BatchStream b(split, toy_tokenizer(), 2, 4, 99);
  while (true) {
    auto ba = a.next();
    auto bb = b.next();
    CHECK(ba.has_value() == bb.has_value());
    if (!ba) break;
    CHECK((ba->array() == bb->array()).all());
  }
}

TEST_CASE("different seeds reorder windows") {
  std::string doc;
  for (int k = 0; k < 64; ++k) doc += "abcd";
  CorpusSplit split{SplitName::train, {doc}};
  BatchStream a(split, toy_tokenizer(), 2, 4, 1);
  BatchStream b(split, toy_tokenizer(), 2, 4, 2);
  bool any_diff = false;
  while (auto ba = a.next()) {
    auto bb = b.next();
    REQUIRE(bb.has_value());
    if ((ba->array() != bb->array()).any()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("a window longer than the corpus is an error") {
  CorpusSplit split{SplitName::train, {"ab"}};
  try {
    BatchStream stream(split, toy_tokenizer(), 1, 64, 1);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::too_short);
  }
}

TEST_CASE("clean batches never contain the mask id") {
  CorpusSplit split{SplitName::train, {"abcdabcdabcd"}};
  Tokenizer tok = toy_tokenizer();
  BatchStream stream(split, tok, 2, 4, 5);
  while (auto batch = stream.next()) {
    CHECK((batch->array() >= 0).all());
    CHECK((batch->array() < tok.vocab.mask_id()).all());
  }
}

TEST_CASE("epochs reshuffle but batch_at stays a pure function") {
  std::string doc;
  for (int k = 0; k < 32; ++k) doc += "abcd";
  CorpusSplit split{SplitName::train, {doc}};
  BatchStream stream(split, toy_tokenizer(), 2, 4, 11);
  const auto per_epoch = stream.batches_per_epoch();
  const IdMat first = stream.batch_at(0);
  const IdMat wrapped = stream.batch_at(per_epoch);  // epoch 1
  const IdMat again = stream.batch_at(0);
  CHECK((first.array() == again.array()).all());
  CHECK(first.rows() == wrapped.rows());
}

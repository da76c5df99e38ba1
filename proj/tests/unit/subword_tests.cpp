#include <string>
#include <vector>

#include "doctest.h"
#include "keyspan/corpus.hpp"
#include "keyspan/rng.hpp"
#include "keyspan/subword.hpp"

using namespace keyspan;

namespace {

Document doc_of(const std::string& text) {
  Document doc;
  doc.doc_id = "d";
  doc.text = text;
  doc.words = segment_words(text);
  return doc;
}

}  // namespace

TEST_CASE("special token ids are pinned") {
  BpeTokenizer tok = BpeTokenizer::train({doc_of("ab ab")}, 10);
  CHECK(BpeTokenizer::kCls == 0);
  CHECK(BpeTokenizer::kUnk == 1);
  CHECK(tok.piece(0) == "<cls>");
  CHECK(tok.piece(1) == "<unk>");
}

TEST_CASE("merges follow pair frequency with lexicographic ties") {
  // Two copies of "aaab": (a,a) appears 4 times and wins first. After
  // that, (a,b) and (aa,a) both appear twice; the lexicographically
  // smaller pair ("a","b") merges next, then (aa,ab) completes the word.
  BpeTokenizer tok = BpeTokenizer::train({doc_of("aaab aaab")}, 100);
  CHECK(tok.merge_count() == 3);

  auto enc = tok.encode(segment_words("aaab"));
  REQUIRE(enc.ids.size() == 1);
  CHECK(tok.piece(enc.ids[0]) == "aaab");

  auto partial = tok.encode(segment_words("aab"));
  REQUIRE(partial.ids.size() == 2);
  CHECK(tok.piece(partial.ids[0]) == "aa");
  CHECK(tok.piece(partial.ids[1]) == "b");
}

TEST_CASE("training stops when no pair repeats") {
  // Every pair occurs once; nothing merges.
  BpeTokenizer tok = BpeTokenizer::train({doc_of("abcd")}, 100);
  CHECK(tok.merge_count() == 0);
  auto enc = tok.encode(segment_words("abcd"));
  CHECK(enc.ids.size() == 4);
}

TEST_CASE("unseen bytes become single-byte unk tokens") {
  BpeTokenizer tok = BpeTokenizer::train({doc_of("abab ab")}, 100);
  auto enc = tok.encode(segment_words("axb"));
  REQUIRE(enc.ids.size() == 3);
  CHECK(tok.piece(enc.ids[0]) == "a");
  CHECK(enc.ids[1] == BpeTokenizer::kUnk);
  CHECK(tok.piece(enc.ids[2]) == "b");
  CHECK(enc.spans[1] == std::pair<std::size_t, std::size_t>{1, 2});
}

TEST_CASE("token spans tile each word exactly") {
  std::vector<Document> corpus = {
      doc_of("the neural parser parses neural text"),
      doc_of("parsers parse the parse tree")};
  BpeTokenizer tok = BpeTokenizer::train(corpus, 50);

  Rng rng(99);
  const std::string alphabet = "aeprstn ";
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    int len = rng.range_int(1, 60);
    for (int i = 0; i < len; ++i)
      text += alphabet[static_cast<std::size_t>(rng.below(alphabet.size()))];
    std::vector<Word> words = segment_words(text);
    auto enc = tok.encode(words);
    REQUIRE(enc.ids.size() == enc.spans.size());

    std::size_t t = 0;
    for (const auto& word : words) {
      std::size_t expect = word.char_start;
      while (expect < word.char_end) {
        REQUIRE(t < enc.spans.size());
        auto [lo, hi] = enc.spans[t];
        CHECK(lo == expect);
        CHECK(hi > lo);
        CHECK(hi <= word.char_end);
        if (enc.ids[t] != BpeTokenizer::kUnk)  // non-unk pieces spell their bytes
          CHECK(tok.piece(enc.ids[t]) == text.substr(lo, hi - lo));
        expect = hi;
        ++t;
      }
    }
    CHECK(t == enc.spans.size());
  }
}

TEST_CASE("encode honors the block char offset") {
  BpeTokenizer tok = BpeTokenizer::train({doc_of("ab ab")}, 10);
  std::vector<Word> words = {{"ab", 100, 102}};
  auto enc = tok.encode(words, 100);
  REQUIRE(enc.spans.size() == 1);
  CHECK(enc.spans[0] == std::pair<std::size_t, std::size_t>{0, 2});
}

TEST_CASE("tokenizer round-trips through json") {
  std::vector<Document> corpus = {doc_of("neural parsers parse neural text")};
  BpeTokenizer tok = BpeTokenizer::train(corpus, 50);
  BpeTokenizer back = BpeTokenizer::from_json(tok.to_json());

  CHECK(back.vocab_size() == tok.vocab_size());
  CHECK(back.merge_count() == tok.merge_count());
  std::vector<Word> words = segment_words("neural parse prx");
  auto a = tok.encode(words);
  auto b = back.encode(words);
  CHECK(a.ids == b.ids);
  CHECK(a.spans == b.spans);
}

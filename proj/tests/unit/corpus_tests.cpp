#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "keyspan/corpus.hpp"
#include "keyspan/errors.hpp"
#include "keyspan/rng.hpp"
#include "test_support.hpp"

using namespace keyspan;

namespace {

Document make_doc(const std::string& id, int n_words) {
  Document doc;
  doc.doc_id = id;
  for (int i = 0; i < n_words; ++i) {
    if (i > 0) doc.text += ' ';
    std::string w = "w" + std::to_string(i);
    std::size_t start = doc.text.size();
    doc.text += w;
    doc.words.push_back({w, start, doc.text.size()});
  }
  return doc;
}

}  // namespace

TEST_CASE("segmentation splits on whitespace and peels edge punctuation") {
  auto words = segment_words("Hello, world! (really)");
  std::vector<std::string> surfaces;
  for (const auto& w : words) surfaces.push_back(w.surface);
  CHECK(surfaces == std::vector<std::string>{"Hello", ",", "world", "!", "(",
                                             "really", ")"});
  for (const auto& w : words) {
    CHECK(w.char_end > w.char_start);
    CHECK(std::string("Hello, world! (really)")
              .compare(w.char_start, w.char_end - w.char_start, w.surface) == 0);
  }
}

TEST_CASE("segmentation keeps interior punctuation and multibyte bytes intact") {
  auto words = segment_words("state-of-the-art caf\xc3\xa9.");
  REQUIRE(words.size() == 3);
  CHECK(words[0].surface == "state-of-the-art");
  CHECK(words[1].surface == "caf\xc3\xa9");
  CHECK(words[2].surface == ".");
}

TEST_CASE("windowing strides by block size minus overlap") {
  Document doc = make_doc("d", 900);
  auto blocks = split_blocks(doc, 512, 128);
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[0].word_offset == 0);
  CHECK(blocks[1].word_offset == 384);
  CHECK(blocks[2].word_offset == 768);
  CHECK(blocks[0].size() == 512);
  CHECK(blocks[1].size() == 512);
  CHECK(blocks[2].size() == 132);
}

TEST_CASE("short documents produce exactly one block") {
  CHECK(split_blocks(make_doc("a", 300), 512, 128).size() == 1);
  CHECK(split_blocks(make_doc("b", 512), 512, 128).size() == 1);
  CHECK(split_blocks(make_doc("c", 1), 512, 128).size() == 1);
  CHECK(split_blocks(make_doc("d", 0), 512, 128).empty());
}

TEST_CASE("a trailing window covering only overlap words is suppressed") {
  // 512 + 384 = 896 words: the second window ends flush at the document
  // end; a third window would add nothing new.
  auto blocks = split_blocks(make_doc("d", 896), 512, 128);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[1].word_offset == 384);
  CHECK(blocks[1].size() == 512);
}

TEST_CASE("random-length windowing covers every word in order") {
  Rng rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    int n = rng.range_int(1, 3000);
    Document doc = make_doc("d", n);
    auto blocks = split_blocks(doc, 512, 128);
    std::vector<bool> covered(n, false);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& block = blocks[b];
      CHECK(block.block_index == static_cast<int>(b));
      if (b > 0) {
        int prev_end = blocks[b - 1].word_offset +
                       static_cast<int>(blocks[b - 1].size());
        CHECK(block.word_offset == blocks[b - 1].word_offset + 384);
        CHECK(prev_end - block.word_offset == 128);  // shared overlap
      }
      for (std::size_t i = 0; i < block.size(); ++i) {
        int g = to_global(block, static_cast<int>(i));
        REQUIRE(g < n);
        covered[g] = true;
        CHECK(block.words[i].surface == doc.words[g].surface);
      }
    }
    CHECK(std::all_of(covered.begin(), covered.end(), [](bool c) { return c; }));
  }
}

TEST_CASE("block text matches the word byte extents") {
  Document doc = make_doc("d", 700);
  for (const auto& block : split_blocks(doc, 512, 128)) {
    auto [lo, hi] = block_char_extent(block, 0, static_cast<int>(block.size()));
    CHECK(lo == 0);
    CHECK(hi == block.text.size());
    // every word's global offsets, shifted by char_offset, index block.text
    for (const auto& w : block.words) {
      CHECK(block.text.compare(w.char_start - block.char_offset,
                               w.char_end - w.char_start, w.surface) == 0);
    }
  }
}

TEST_CASE("global and local word indices round-trip") {
  Document doc = make_doc("d", 1000);
  for (const auto& block : split_blocks(doc, 512, 128)) {
    for (int i = 0; i < static_cast<int>(block.size()); ++i)
      CHECK(to_local(block, to_global(block, i)) == i);
    CHECK_THROWS_AS(to_local(block, -1), ValidationError);
    CHECK_THROWS_AS(to_global(block, static_cast<int>(block.size())),
                    ValidationError);
  }
}

TEST_CASE("corpus files round-trip through save and load") {
  testsupport::ScratchDir tmp;
  Document doc = make_doc("doc-a", 12);
  doc.gold_spans.push_back({2, 4, "method"});
  doc.topics.emplace();
  doc.topics->insert("t1");
  Document doc2 = make_doc("doc-b", 5);

  const std::string path = tmp.path("corpus.jsonl");
  save_corpus({doc, doc2}, path);
  auto loaded = load_corpus(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].doc_id == "doc-a");
  CHECK(loaded[0].text == doc.text);
  REQUIRE(loaded[0].words.size() == doc.words.size());
  CHECK(loaded[0].words[3].surface == doc.words[3].surface);
  REQUIRE(loaded[0].gold_spans.size() == 1);
  CHECK(loaded[0].gold_spans[0].word_start == 2);
  CHECK(loaded[0].gold_spans[0].type_label == "method");
  REQUIRE(loaded[0].topics.has_value());
  CHECK(loaded[0].topics->count("t1") == 1);
  CHECK_FALSE(loaded[1].topics.has_value());
}

TEST_CASE("corpus loader reports the offending line") {
  testsupport::ScratchDir tmp;
  const std::string path = tmp.path("bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"doc_id": "a", "text": "one two"})" << "\n";
    out << "{not json\n";
  }
  try {
    load_corpus(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find(path) != std::string::npos);
  }
}

TEST_CASE("corpus loader rejects duplicate document ids") {
  testsupport::ScratchDir tmp;
  const std::string path = tmp.path("dup.jsonl");
  {
    std::ofstream out(path);
    out << R"({"doc_id": "a", "text": "one"})" << "\n";
    out << R"({"doc_id": "a", "text": "two"})" << "\n";
  }
  CHECK_THROWS_AS(load_corpus(path), ParseError);
}

TEST_CASE("document validation catches overlapping gold spans") {
  Document doc = make_doc("d", 10);
  doc.gold_spans.push_back({2, 5, ""});
  doc.gold_spans.push_back({4, 6, ""});
  try {
    validate_document(doc);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("d") != std::string::npos);
  }
}

TEST_CASE("document validation catches words that disagree with the text") {
  Document doc = make_doc("d", 3);
  doc.words[1].surface = "mismatch";
  CHECK_THROWS_AS(validate_document(doc), ValidationError);
}

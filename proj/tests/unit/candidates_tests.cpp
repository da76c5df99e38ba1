#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "keyspan/candidates.hpp"
#include "keyspan/corpus.hpp"
#include "keyspan/errors.hpp"
#include "test_support.hpp"

using namespace keyspan;

namespace {

TextBlock block_from_text(const std::string& text, const std::string& id = "d") {
  Document doc;
  doc.doc_id = id;
  doc.text = text;
  doc.words = segment_words(text);
  auto blocks = split_blocks(doc, 512, 128);
  REQUIRE(blocks.size() == 1);
  return blocks[0];
}

std::vector<std::string> surfaces(const std::vector<CandidatePhrase>& cands) {
  std::vector<std::string> out;
  for (const auto& c : cands) out.push_back(c.surface);
  return out;
}

}  // namespace

TEST_CASE("tagger covers the coarse classes") {
  CHECK(tag_word("the", false) == PosTag::DET);
  CHECK(tag_word("is", false) == PosTag::VERB);
  CHECK(tag_word("of", false) == PosTag::OTHER);
  CHECK(tag_word("quick", false) == PosTag::ADJ);
  CHECK(tag_word("parser", false) == PosTag::NOUN);
  CHECK(tag_word("London", false) == PosTag::PROPN);
  CHECK(tag_word("London", true) == PosTag::NOUN);  // sentence-initial caps
  CHECK(tag_word("quickly", false) == PosTag::OTHER);
  CHECK(tag_word("running", false) == PosTag::VERB);
  CHECK(tag_word("trained", false) == PosTag::VERB);
  CHECK(tag_word("robustness", false) == PosTag::NOUN);
  CHECK(tag_word("statistical", false) == PosTag::ADJ);
  CHECK(tag_word("42", false) == PosTag::OTHER);
  CHECK(tag_word(".", false) == PosTag::OTHER);
}

TEST_CASE("sentence boundaries reset the capitalization cue") {
  TextBlock block = block_from_text("Models work . Berlin is far");
  PosTaggedBlock tags = tag_block(block);
  REQUIRE(tags.tags.size() == 6);
  CHECK(tags.tags[0] == PosTag::NOUN);   // first word of the block
  CHECK(tags.tags[3] == PosTag::NOUN);   // first word after "."
}

TEST_CASE("nested extraction lists every noun-final suffix of a maximal span") {
  TextBlock block = block_from_text("the quick neural parser improved accuracy");
  PosTaggedBlock tags = tag_block(block);
  auto nested = extract_candidates(block, tags);
  auto got = surfaces(nested);
  std::set<std::string> set(got.begin(), got.end());
  CHECK(set.count("the quick neural parser") == 1);
  CHECK(set.count("quick neural parser") == 1);
  CHECK(set.count("neural parser") == 1);
  CHECK(set.count("parser") == 1);
  CHECK(set.count("accuracy") == 1);
  CHECK(set.size() == got.size());  // no duplicates
  CHECK(got.size() == 5);
}

TEST_CASE("maximal extraction keeps only the widest matches") {
  TextBlock block = block_from_text("the quick neural parser improved accuracy");
  PosTaggedBlock tags = tag_block(block);
  auto got = surfaces(extract_candidates_maximal(block, tags));
  CHECK(got == std::vector<std::string>{"the quick neural parser", "accuracy"});
}

TEST_CASE("candidate spans are trimmed to end at a noun") {
  // "latent" is adjective-tagged, so the run "latent robust" has no noun
  // to end on and produces nothing.
  TextBlock block = block_from_text("we use latent robust and simple models");
  PosTaggedBlock tags = tag_block(block);
  auto got = surfaces(extract_candidates_maximal(block, tags));
  CHECK(got == std::vector<std::string>{"simple models"});
}

TEST_CASE("determiner alone never forms a candidate") {
  TextBlock block = block_from_text("the of the is");
  PosTaggedBlock tags = tag_block(block);
  CHECK(extract_candidates(block, tags).empty());
}

TEST_CASE("candidate word indices are block-local and match surfaces") {
  Document doc;
  doc.doc_id = "d";
  std::vector<std::string> words(700, "walked");  // verb-tagged filler
  words[500] = "neural";
  words[501] = "parser";
  for (const auto& w : words) {
    if (!doc.text.empty()) doc.text += ' ';
    std::size_t start = doc.text.size();
    doc.text += w;
    doc.words.push_back({w, start, doc.text.size()});
  }
  auto blocks = split_blocks(doc, 512, 128);
  REQUIRE(blocks.size() == 2);
  const TextBlock& second = blocks[1];
  auto cands = extract_candidates(second, tag_block(second));
  bool found = false;
  for (const auto& c : cands) {
    if (c.surface != "neural parser") continue;
    found = true;
    CHECK(c.block_index == 1);
    CHECK(to_global(second, c.word_start) == 500);
    CHECK(to_global(second, c.word_end - 1) == 501);
  }
  CHECK(found);
}

TEST_CASE("subtoken alignment keeps overlapping pieces and flags truncation") {
  CandidatePhrase cand;
  cand.word_start = 1;
  cand.word_end = 2;
  std::vector<std::pair<std::size_t, std::size_t>> spans = {
      {0, 4}, {4, 7}, {7, 10}};
  CandidatePhrase aligned = align_subtokens(cand, {4, 10}, spans);
  CHECK(aligned.subtoken_indices == std::vector<int>{1, 2});
  CHECK_FALSE(aligned.unencodable);

  CandidatePhrase tail = align_subtokens(cand, {10, 14}, spans);
  CHECK(tail.subtoken_indices.empty());
  CHECK(tail.unencodable);
}

TEST_CASE("external candidate files are validated against their blocks") {
  testsupport::ScratchDir tmp;
  TextBlock block = block_from_text("alpha beta gamma", "doc1");
  const std::string path = tmp.path("cands.jsonl");

  SUBCASE("valid rows load, deduplicate, and attach to the right block") {
    {
      std::ofstream out(path);
      out << R"({"doc_id":"doc1","block_index":0,"word_start":0,"word_end":2})" << "\n";
      out << R"({"doc_id":"doc1","block_index":0,"word_start":0,"word_end":2})" << "\n";
      out << R"({"doc_id":"doc1","block_index":0,"word_start":2,"word_end":3})" << "\n";
    }
    auto loaded = load_external_candidates(path, {block});
    REQUIRE(loaded.count({"doc1", 0}) == 1);
    const auto& cands = loaded.at({"doc1", 0});
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].surface == "alpha beta");
    CHECK(cands[1].surface == "gamma");
  }

  SUBCASE("a span beyond the block is rejected with its line number") {
    {
      std::ofstream out(path);
      out << R"({"doc_id":"doc1","block_index":0,"word_start":2,"word_end":9})" << "\n";
    }
    try {
      load_external_candidates(path, {block});
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }

  SUBCASE("an unknown block reference is rejected") {
    {
      std::ofstream out(path);
      out << R"({"doc_id":"doc1","block_index":3,"word_start":0,"word_end":1})" << "\n";
    }
    CHECK_THROWS_AS(load_external_candidates(path, {block}), ParseError);
  }
}

#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "keyspan/candidates.hpp"
#include "keyspan/corpus.hpp"
#include "keyspan/errors.hpp"
#include "keyspan/synth.hpp"

using namespace keyspan;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.n_docs = 24;
  spec.n_topics = 4;
  spec.phrases_per_topic = 3;
  spec.doc_length = 50;
  spec.background_vocab = 80;
  spec.seed = 99;
  return spec;
}

std::string span_surface(const Document& doc, const GoldSpan& g) {
  std::string out;
  for (int w = g.word_start; w < g.word_end; ++w) {
    if (w > g.word_start) out += ' ';
    out += doc.words[w].surface;
  }
  return out;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const SynthSpec spec = small_spec();
  const SynthCorpus a = generate(spec);
  const SynthCorpus b = generate(spec);
  REQUIRE(a.docs.size() == b.docs.size());
  for (std::size_t i = 0; i < a.docs.size(); ++i) {
    CHECK(a.docs[i].text == b.docs[i].text);
    CHECK(a.docs[i].topics == b.docs[i].topics);
    CHECK(a.docs[i].gold_spans.size() == b.docs[i].gold_spans.size());
  }
  CHECK(a.signatures == b.signatures);

  SynthSpec other = spec;
  other.seed = 100;
  const SynthCorpus c = generate(other);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.docs.size(); ++i) {
    if (a.docs[i].text != c.docs[i].text) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("documents carry their topics' signatures and nothing else") {
  const SynthCorpus corpus = generate(small_spec());
  CHECK(corpus.docs.size() == 24);
  REQUIRE(corpus.schema.T() == 4);
  REQUIRE(corpus.signatures.size() == 4);

  // Signature phrases are two distinct noun-shaped words, unique globally.
  std::set<std::string> all_sig_words;
  for (const auto& topic_sigs : corpus.signatures) {
    CHECK(topic_sigs.size() == 3);
    for (const auto& phrase : topic_sigs) {
      const auto space = phrase.find(' ');
      REQUIRE(space != std::string::npos);
      for (const std::string& word :
           {phrase.substr(0, space), phrase.substr(space + 1)}) {
        CHECK(tag_word(word, false) == PosTag::NOUN);
        CHECK(all_sig_words.insert(word).second);  // never reused
      }
    }
  }

  for (const Document& doc : corpus.docs) {
    REQUIRE(doc.topics.has_value());
    CHECK(!doc.topics->empty());
    CHECK(doc.topics->size() <= 2);
    CHECK(!doc.gold_spans.empty());

    // Gold spans are exactly the planted signature phrases, typed by the
    // owning topic, and that topic is one of the document's.
    for (const GoldSpan& g : doc.gold_spans) {
      CHECK(g.word_end - g.word_start == 2);
      REQUIRE(!g.type_label.empty());
      CHECK(doc.topics->count(g.type_label) == 1);
      const int t = corpus.schema.index_of(g.type_label);
      REQUIRE(t >= 0);
      const std::string surface = span_surface(doc, g);
      bool known = false;
      for (const auto& phrase : corpus.signatures[t]) {
        if (phrase == surface) known = true;
      }
      CHECK(known);
    }

    // Words of unassigned topics never leak into the text.
    std::set<std::string> doc_words;
    for (const Word& w : doc.words) doc_words.insert(w.surface);
    for (int t = 0; t < corpus.schema.T(); ++t) {
      if (doc.topics->count(corpus.schema.topic_ids[t])) continue;
      for (const auto& phrase : corpus.signatures[t]) {
        const auto space = phrase.find(' ');
        CHECK(doc_words.count(phrase.substr(0, space)) == 0);
        CHECK(doc_words.count(phrase.substr(space + 1)) == 0);
      }
    }
  }
}

TEST_CASE("the candidate chunker recovers every planted phrase") {
  const SynthCorpus corpus = generate(small_spec());
  for (const Document& doc : corpus.docs) {
    for (const TextBlock& block : split_blocks(doc, 512, 128)) {
      const PosTaggedBlock tags = tag_block(block);
      std::set<std::pair<int, int>> found;
      for (const CandidatePhrase& c : extract_candidates(block, tags)) {
        const int start = to_global(block, c.word_start);
        found.insert({start, start + (c.word_end - c.word_start)});
      }
      for (const GoldSpan& g : doc.gold_spans) {
        CHECK(found.count({g.word_start, g.word_end}) == 1);
      }
    }
  }
}

TEST_CASE("noise nouns are document-unique and repeat as specified") {
  const SynthCorpus corpus = generate(small_spec());

  // Any word outside signatures and gold spans that tags NOUN is noise.
  std::map<std::string, std::set<std::string>> noise_docs;
  std::map<std::string, int> noise_count_in_doc;
  for (const Document& doc : corpus.docs) {
    std::set<int> gold_words;
    for (const GoldSpan& g : doc.gold_spans) {
      for (int w = g.word_start; w < g.word_end; ++w) gold_words.insert(w);
    }
    std::set<std::string> nouns_here;
    for (std::size_t i = 0; i < doc.words.size(); ++i) {
      if (gold_words.count(static_cast<int>(i))) continue;
      const std::string& w = doc.words[i].surface;
      if (tag_word(w, false) == PosTag::NOUN) {
        noise_docs[w].insert(doc.doc_id);
        ++noise_count_in_doc[doc.doc_id + "#" + w];
        nouns_here.insert(w);
      }
    }
    // Default spec: exactly one noise noun per document.
    CHECK(nouns_here.size() == 1);
    for (const std::string& w : nouns_here) {
      const int reps = noise_count_in_doc[doc.doc_id + "#" + w];
      CHECK(reps >= 3);
      CHECK(reps <= 5);
    }
  }
  for (const auto& [word, docs] : noise_docs) {
    CAPTURE(word);
    CHECK(docs.size() == 1);  // df = 1 by construction
  }
}

TEST_CASE("spec validation rejects impossible layouts") {
  CHECK_NOTHROW(small_spec().validate());
  auto broken = [](auto mutate) {
    SynthSpec spec;
    spec.n_docs = 24;
    spec.n_topics = 4;
    spec.phrases_per_topic = 3;
    spec.doc_length = 50;
    spec.background_vocab = 80;
    mutate(spec);
    CHECK_THROWS_AS(spec.validate(), ValidationError);
  };
  broken([](SynthSpec& s) { s.n_docs = 0; });
  broken([](SynthSpec& s) { s.n_topics = 1; });
  broken([](SynthSpec& s) { s.topics_per_doc = {0, 1}; });
  broken([](SynthSpec& s) { s.topics_per_doc = {2, 1}; });
  broken([](SynthSpec& s) { s.topics_per_doc = {1, 9}; });
  // More insertions than distinct phrases: sampling is without replacement.
  broken([](SynthSpec& s) { s.insertions_per_topic_per_doc = {2, 4}; });
  broken([](SynthSpec& s) { s.noise_repeats = {5, 3}; });
  broken([](SynthSpec& s) { s.noise_words_per_doc = -1; });
  // Too many insertions to fit between doc_length + 1 gap positions.
  broken([](SynthSpec& s) { s.doc_length = 2; });
}

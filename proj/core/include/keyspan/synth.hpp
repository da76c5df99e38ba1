#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "keyspan/corpus.hpp"
#include "keyspan/topics.hpp"

namespace keyspan {

// Deterministic planted-keyphrase corpus. Each topic owns a set of
// two-word noun-shaped signature phrases; background words carry
// verb/adverb suffixes so they never enter the noun-phrase candidate
// pattern. Beyond the signatures, every document also gets a few
// document-unique "noise nouns": repeated, high-idf words with no topic
// signal, which keep frequency-based rankers honest.
struct SynthSpec {
  int n_docs = 200;
  int n_topics = 8;
  int phrases_per_topic = 5;
  int doc_length = 120;  // background words before insertions
  std::pair<int, int> topics_per_doc = {1, 2};
  int background_vocab = 400;
  std::pair<int, int> insertions_per_topic_per_doc = {2, 3};
  int noise_words_per_doc = 1;
  std::pair<int, int> noise_repeats = {3, 5};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthCorpus {
  std::vector<Document> docs;  // gold_spans and topics filled in
  TopicSchema schema;
  // topic -> its signature phrases (each "wordA wordB")
  std::vector<std::vector<std::string>> signatures;
};

SynthCorpus generate(const SynthSpec& spec);

}  // namespace keyspan

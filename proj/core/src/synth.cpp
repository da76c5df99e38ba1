#include "keyspan/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "keyspan/candidates.hpp"
#include "keyspan/errors.hpp"
#include "keyspan/rng.hpp"

namespace keyspan {

namespace {

// Consonant-vowel syllables. Concatenations end in a vowel, so they never
// pick up one of the tagger's verb/adverb/adjective suffixes by accident.
const char* const kSyllables[] = {
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
    "ga", "ge", "gi", "go", "gu", "ka", "ke", "ki", "ko", "ku",
    "la", "le", "li", "lo", "lu", "ma", "me", "mi", "mo", "mu",
    "na", "ne", "ni", "no", "nu", "pa", "pe", "pi", "po", "pu",
    "ra", "re", "ri", "ro", "ru", "sa", "se", "si", "so", "su",
    "ta", "te", "ti", "to", "tu", "va", "ve", "vi", "vo", "vu",
    "za", "ze", "zi", "zo", "zu"};
constexpr int kNumSyllables = static_cast<int>(std::size(kSyllables));

// Suffixes that route a word away from the noun-phrase pattern.
const char* const kBackgroundSuffixes[] = {"ly", "ed", "ing"};

std::string syllable_word(Rng& rng, int syllables) {
  std::string w;
  for (int i = 0; i < syllables; ++i) w += kSyllables[rng.below(kNumSyllables)];
  return w;
}

// Draws a word the tagger will call NOUN, distinct from everything in
// `used`. The capacity check in SynthSpec::validate keeps the retry loop
// far from saturation.
std::string fresh_noun(Rng& rng, std::set<std::string>& used) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::string w = syllable_word(rng, 3);
    if (used.count(w) != 0) continue;
    if (tag_word(w, false) != PosTag::NOUN) continue;
    used.insert(w);
    return w;
  }
  throw RuntimeFailure("synthetic corpus: exhausted noun-shaped word pool");
}

std::string fresh_background(Rng& rng, std::set<std::string>& used) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::string w = syllable_word(rng, 2);
    w += kBackgroundSuffixes[rng.below(3)];
    PosTag t = tag_word(w, false);
    if (t != PosTag::VERB && t != PosTag::OTHER) continue;
    if (used.count(w) != 0) continue;
    used.insert(w);
    return w;
  }
  throw RuntimeFailure("synthetic corpus: exhausted background word pool");
}

std::string topic_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "topic%02d", i);
  return buf;
}

std::string doc_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth%04d", i);
  return buf;
}

// One planted unit: either a signature phrase (topic >= 0, two words)
// or a single noise-noun occurrence (topic == -1).
struct Insertion {
  std::vector<std::string> words;
  int topic = -1;
};

}  // namespace

void SynthSpec::validate() const {
  if (n_docs < 1) throw ValidationError("synth: n_docs must be >= 1");
  if (n_topics < 2) throw ValidationError("synth: n_topics must be >= 2");
  if (phrases_per_topic < 1)
    throw ValidationError("synth: phrases_per_topic must be >= 1");
  if (doc_length < 1) throw ValidationError("synth: doc_length must be >= 1");
  if (background_vocab < 1)
    throw ValidationError("synth: background_vocab must be >= 1");
  if (topics_per_doc.first < 1 || topics_per_doc.second < topics_per_doc.first)
    throw ValidationError("synth: topics_per_doc range is malformed");
  if (topics_per_doc.second > n_topics)
    throw ValidationError("synth: topics_per_doc exceeds n_topics");
  if (insertions_per_topic_per_doc.first < 1 ||
      insertions_per_topic_per_doc.second < insertions_per_topic_per_doc.first)
    throw ValidationError("synth: insertions_per_topic_per_doc range is malformed");
  if (insertions_per_topic_per_doc.second > phrases_per_topic)
    throw ValidationError(
        "synth: insertions_per_topic_per_doc exceeds phrases_per_topic "
        "(phrases are planted without replacement)");
  if (noise_words_per_doc < 0)
    throw ValidationError("synth: noise_words_per_doc must be >= 0");
  if (noise_words_per_doc > 0 &&
      (noise_repeats.first < 1 || noise_repeats.second < noise_repeats.first))
    throw ValidationError("synth: noise_repeats range is malformed");

  // Every insertion needs its own inter-word gap so planted units never
  // touch each other.
  long max_items =
      static_cast<long>(topics_per_doc.second) * insertions_per_topic_per_doc.second +
      static_cast<long>(noise_words_per_doc) *
          (noise_words_per_doc > 0 ? noise_repeats.second : 0);
  if (max_items > static_cast<long>(doc_length) + 1)
    throw ValidationError(
        "synth: doc_length too small for the requested insertion counts");

  // Global uniqueness demands: signature words and noise nouns share the
  // three-syllable shape; background words use two syllables plus a suffix.
  long nouns_needed = static_cast<long>(n_topics) * phrases_per_topic * 2 +
                      static_cast<long>(n_docs) * noise_words_per_doc;
  long noun_capacity =
      static_cast<long>(kNumSyllables) * kNumSyllables * kNumSyllables;
  if (nouns_needed > noun_capacity / 2)
    throw ValidationError("synth: word pool too small for unique noun draws");
  long bg_capacity = static_cast<long>(kNumSyllables) * kNumSyllables * 3;
  if (background_vocab > bg_capacity / 2)
    throw ValidationError("synth: word pool too small for the background vocabulary");
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();

  Rng word_rng(Rng::derive(spec.seed, 11));
  Rng doc_rng(Rng::derive(spec.seed, 23));

  SynthCorpus out;
  out.schema.mode = LabelMode::multi_label;
  for (int t = 0; t < spec.n_topics; ++t)
    out.schema.topic_ids.push_back(topic_name(t));

  std::set<std::string> used_nouns;
  out.signatures.resize(spec.n_topics);
  for (int t = 0; t < spec.n_topics; ++t) {
    for (int p = 0; p < spec.phrases_per_topic; ++p) {
      std::string a = fresh_noun(word_rng, used_nouns);
      std::string b = fresh_noun(word_rng, used_nouns);
      out.signatures[t].push_back(a + " " + b);
    }
  }

  std::set<std::string> used_background;
  std::vector<std::string> background;
  background.reserve(spec.background_vocab);
  for (int i = 0; i < spec.background_vocab; ++i)
    background.push_back(fresh_background(word_rng, used_background));

  std::vector<int> topic_order(spec.n_topics);
  std::vector<int> phrase_order(spec.phrases_per_topic);
  std::vector<int> gap_order(spec.doc_length + 1);

  for (int d = 0; d < spec.n_docs; ++d) {
    Document doc;
    doc.doc_id = doc_name(d);

    int n_assigned =
        doc_rng.range_int(spec.topics_per_doc.first, spec.topics_per_doc.second);
    for (int t = 0; t < spec.n_topics; ++t) topic_order[t] = t;
    doc_rng.shuffle(topic_order);
    std::vector<int> assigned(topic_order.begin(),
                              topic_order.begin() + n_assigned);
    std::sort(assigned.begin(), assigned.end());

    doc.topics.emplace();
    for (int t : assigned) doc.topics->insert(topic_name(t));

    std::vector<Insertion> items;
    for (int t : assigned) {
      int count = doc_rng.range_int(spec.insertions_per_topic_per_doc.first,
                                    spec.insertions_per_topic_per_doc.second);
      for (int p = 0; p < spec.phrases_per_topic; ++p) phrase_order[p] = p;
      doc_rng.shuffle(phrase_order);
      for (int i = 0; i < count; ++i) {
        const std::string& phrase = out.signatures[t][phrase_order[i]];
        auto cut = phrase.find(' ');
        items.push_back(
            {{phrase.substr(0, cut), phrase.substr(cut + 1)}, t});
      }
    }
    for (int j = 0; j < spec.noise_words_per_doc; ++j) {
      std::string noise = fresh_noun(word_rng, used_nouns);
      int reps =
          doc_rng.range_int(spec.noise_repeats.first, spec.noise_repeats.second);
      for (int r = 0; r < reps; ++r) items.push_back({{noise}, -1});
    }
    doc_rng.shuffle(items);

    // One distinct gap per insertion; a gap index g means "before the g-th
    // background word" (g == doc_length appends at the end).
    for (int g = 0; g <= spec.doc_length; ++g) gap_order[g] = g;
    doc_rng.shuffle(gap_order);
    std::vector<int> gaps(gap_order.begin(), gap_order.begin() + items.size());
    std::sort(gaps.begin(), gaps.end());

    std::vector<std::string> surfaces;
    std::size_t next_item = 0;
    for (int g = 0; g <= spec.doc_length; ++g) {
      while (next_item < gaps.size() && gaps[next_item] == g) {
        const Insertion& ins = items[next_item];
        if (ins.topic >= 0) {
          GoldSpan span;
          span.word_start = static_cast<int>(surfaces.size());
          span.word_end = span.word_start + static_cast<int>(ins.words.size());
          span.type_label = topic_name(ins.topic);
          doc.gold_spans.push_back(span);
        }
        surfaces.insert(surfaces.end(), ins.words.begin(), ins.words.end());
        ++next_item;
      }
      if (g < spec.doc_length)
        surfaces.push_back(background[doc_rng.below(background.size())]);
    }

    std::size_t offset = 0;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      if (i > 0) {
        doc.text += ' ';
        ++offset;
      }
      doc.words.push_back({surfaces[i], offset, offset + surfaces[i].size()});
      doc.text += surfaces[i];
      offset += surfaces[i].size();
    }
    std::sort(doc.gold_spans.begin(), doc.gold_spans.end(),
              [](const GoldSpan& a, const GoldSpan& b) {
                return a.word_start < b.word_start;
              });

    validate_document(doc);
    out.docs.push_back(std::move(doc));
  }

  return out;
}

}  // namespace keyspan

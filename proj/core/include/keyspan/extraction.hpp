#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "keyspan/corpus.hpp"
#include "keyspan/model.hpp"

namespace keyspan {

struct RelevanceScore {
  std::string topic;
  double value = 0.0;  // in [-1, 1]
};

struct KeyphrasePrediction {
  std::string doc_id;
  int word_start = 0;  // document-global
  int word_end = 0;    // exclusive
  std::string surface;
  std::vector<RelevanceScore> per_topic;
  double best_relevance = 0.0;  // diagnostic only, never a threshold
};

// r = l_cls[y] - l_i[y] for each predicted topic y. Empty predicted set
// means the block contributes no keyphrases.
std::vector<RelevanceScore> score_phrase(const LabelDistribution& l_cls,
                                         const LabelDistribution& l_i,
                                         const std::set<int>& predicted,
                                         const TopicSchema& schema);

struct ScoredCandidate {
  CandidatePhrase cand;
  std::vector<RelevanceScore> scores;
};

// Keeps exactly the candidates with r strictly positive for at least one
// predicted topic. No cross-topic ranking: scores from different topics
// are never compared.
std::vector<ScoredCandidate> select_keyphrases(
    const std::vector<ScoredCandidate>& scored);

// Merges identical global spans selected from multiple blocks; per-topic
// values keep the max across blocks. Output sorted by (word_start,
// word_end), no duplicate spans.
std::vector<KeyphrasePrediction> aggregate_document(
    const std::string& doc_id,
    const std::vector<std::pair<TextBlock const*, std::vector<ScoredCandidate>>>&
        block_selections);

struct ExtractOptions {
  bool nested_candidates = true;
  // Candidate override: block -> externally supplied candidates.
  const std::map<BlockRef, std::vector<CandidatePhrase>>* external = nullptr;
};

// Full pipeline for one document: split into blocks, encode, predict
// topics, score candidates, select, aggregate.
std::vector<KeyphrasePrediction> extract(const Model& model,
                                         const Document& doc,
                                         const ExtractOptions& opt = {});

void save_predictions(const std::vector<KeyphrasePrediction>& preds,
                      const std::string& path);
std::vector<KeyphrasePrediction> load_predictions(const std::string& path);

}  // namespace keyspan

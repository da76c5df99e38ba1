#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "keyspan/corpus.hpp"
#include "keyspan/topics.hpp"

namespace keyspan {

using Span = std::pair<int, int>;  // word_start, word_end (exclusive)

enum class PartialMatchVariant { any_overlap, one_to_one };
PartialMatchVariant partial_variant_from_string(const std::string& s);
const char* partial_variant_name(PartialMatchVariant v);

struct PRF {
  double p = 0.0, r = 0.0, f1 = 0.0;
};

struct SpanMatchReport {
  PRF exact;
  PRF partial;
  double avg_f1 = 0.0;  // (exact.f1 + partial.f1) / 2
  std::map<std::string, std::pair<double, double>> per_type_recall;
  long n_pred = 0, n_gold = 0;
  int docs_skipped_no_gold = 0;
};

struct TopicF1Report {
  double micro_f1 = 0.0, macro_f1 = 0.0, weighted_f1 = 0.0;
};

// Per-document span sets keyed by doc_id; duplicates within a document are
// collapsed before counting.
using SpanSets = std::map<std::string, std::vector<Span>>;

// Exact match: identical (start, end). Micro-pooled over documents;
// documents with no gold spans are skipped (counted in the report).
PRF exact_match_f1(const SpanSets& pred, const SpanSets& gold,
                   int* docs_skipped = nullptr);

// Partial match: any shared word index. The any_overlap variant counts a
// prediction toward precision if it overlaps ANY gold span and a gold
// span toward recall if ANY prediction overlaps it; one_to_one instead
// matches pairs greedily (longest overlap first) and counts matched pairs.
PRF partial_match_f1(const SpanSets& pred, const SpanSets& gold,
                     PartialMatchVariant variant = PartialMatchVariant::any_overlap,
                     int* docs_skipped = nullptr);

// Typed gold spans for per-type recall; predictions stay untyped.
using TypedSpanSets = std::map<std::string, std::vector<GoldSpan>>;

SpanMatchReport span_report(
    const SpanSets& pred, const SpanSets& gold,
    const std::optional<TypedSpanSets>& typed_gold = std::nullopt,
    PartialMatchVariant variant = PartialMatchVariant::any_overlap);

// Multi-label topic F1 from per-document label sets. Micro pools
// per-topic TP/FP/FN; macro averages per-topic F1; weighted weights each
// topic's F1 by its gold support.
TopicF1Report topic_f1(const std::map<std::string, TopicLabelSet>& pred,
                       const std::map<std::string, TopicLabelSet>& gold,
                       const TopicSchema& schema);

// Every word-boundary occurrence of each (lowercased) phrase in the
// document becomes a span; phrases that never occur contribute nothing.
std::vector<Span> spanize_phrase_list(const Document& doc,
                                      const std::vector<std::string>& phrases);

}  // namespace keyspan

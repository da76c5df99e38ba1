#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "keyspan/corpus.hpp"

namespace keyspan {

enum class LabelMode { multi_label, single_label };

LabelMode label_mode_from_string(const std::string& s);
const char* label_mode_name(LabelMode m);

struct TopicSchema {
  std::vector<std::string> topic_ids;
  LabelMode mode = LabelMode::multi_label;

  int T() const { return static_cast<int>(topic_ids.size()); }
  int index_of(const std::string& id) const;  // -1 when absent
  void validate() const;
};

using TopicLabelSet = std::set<std::string>;

// Passthrough of per-document gold topics with schema validation.
std::map<std::string, TopicLabelSet> label_from_gold(
    const std::vector<Document>& corpus, const TopicSchema& schema);

// Non-negative factorization of the corpus TF-IDF matrix, used as the
// built-in distant labeler when gold topics are absent.
struct TopicModel {
  TopicSchema schema;                          // topics named by top words
  std::vector<std::string> vocab;              // V terms
  std::vector<std::vector<double>> weights;    // T x V topic-word weights
  std::vector<std::vector<double>> loadings;   // D x T document loadings
  std::vector<std::string> doc_ids;            // row order of loadings
  std::vector<double> residuals;               // Frobenius residual per iter
};

struct TopicModelOptions {
  int T = 2;
  std::uint64_t seed = 0;
  int iterations = 200;
  int min_df = 2;        // vocabulary document-frequency floor
  LabelMode mode = LabelMode::multi_label;
};

TopicModel fit_topic_model(const std::vector<Document>& corpus,
                           const TopicModelOptions& opt);

// Multi-label: every topic with loading >= rel_threshold * row max (the
// argmax always qualifies). Single-label: argmax, ties to the lowest
// index. All-zero rows fall back to topic 0 and are counted in
// `zero_row_warnings`.
std::map<std::string, TopicLabelSet> assign_topics(
    const std::vector<std::vector<double>>& loadings,
    const std::vector<std::string>& doc_ids, const TopicSchema& schema,
    double rel_threshold = 0.25, int* zero_row_warnings = nullptr);

// Drops the listed topics; errors if fewer than 2 survive or an id is
// unknown. Label maps are filtered separately with filter_labels.
TopicSchema filter_topics(const TopicSchema& schema,
                          const std::vector<std::string>& removal_list);

// Intersects each label set with the filtered schema; documents whose set
// becomes empty are dropped and counted.
std::map<std::string, TopicLabelSet> filter_labels(
    const std::map<std::string, TopicLabelSet>& labels,
    const TopicSchema& filtered, int* dropped_docs = nullptr);

std::vector<std::string> load_removal_list(const std::string& path);

// Loadings produced outside the built-in factorizer, as JSONL
// {doc_id, loadings: [float]}; row order follows the file.
struct LoadingsFile {
  std::vector<std::vector<double>> loadings;
  std::vector<std::string> doc_ids;
};
LoadingsFile load_loadings(const std::string& path);

}  // namespace keyspan

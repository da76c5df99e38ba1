#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "keyspan/candidates.hpp"
#include "keyspan/corpus.hpp"
#include "keyspan/encoder.hpp"
#include "keyspan/mat.hpp"
#include "keyspan/subword.hpp"
#include "keyspan/topics.hpp"

namespace keyspan {

// Encoder output for one block: the summary slot plus per-subtoken rows.
// subtoken_spans[i] is the byte span (block-local) of token_vectors row i.
struct BlockEncoding {
  Vec summary_vector;
  Mat token_vectors;  // n_body × d
  std::vector<std::pair<std::size_t, std::size_t>> subtoken_spans;
};

// Phrase-attribution head: scores a representation against every topic.
// Multi-label heads squash per topic (sigmoid), single-label heads
// normalize across topics (softmax).
struct LILHead {
  Mat w;  // d × T
  Mat b;  // 1 × T
  LabelMode mode = LabelMode::multi_label;

  int d() const { return w.rows; }
  int T() const { return w.cols; }
};

using LabelDistribution = Vec;

enum class ExplanationAgg { mean, sum_renormalized };
ExplanationAgg explanation_agg_from_string(const std::string& s);
const char* explanation_agg_name(ExplanationAgg a);

// Sum of token_vectors rows at the phrase's subtoken indices.
Vec pool_phrase(const BlockEncoding& enc, const CandidatePhrase& cand);

// Phrase-level label distribution: both representations pass the
// rectifier first, then the difference goes through the shared linear
// head, so a phrase pooling to exactly the summary lands on f(b).
LabelDistribution lil_forward(const LILHead& head, const Vec& phrase,
                              const Vec& summary);

// Block-level label distribution from the rectified summary alone.
LabelDistribution cls_forward(const LILHead& head, const Vec& summary);

// Aggregate phrase distributions into the explanation target. `mean` is
// the default; `sum_renormalized` sums and rescales into [0,1] when the
// peak exceeds 1.
LabelDistribution explanation_distribution(
    const std::vector<LabelDistribution>& phrase_dists, ExplanationAgg agg);

struct LossBundle {
  double L_y = 0.0;
  double L_e = 0.0;
  double alpha = 0.0;
  double L = 0.0;  // (1 - alpha) * L_y + alpha * L_e, always
};

// Cross-entropy in both regimes: categorical over topics (single-label)
// or per-topic binary summed (multi-label). Scores are clamped to
// [1e-7, 1-1e-7] before the logs. A block with no phrase distributions
// passes has_phrases=false and contributes L_e = 0.
LossBundle compute_loss(const LabelDistribution& l_cls,
                        const LabelDistribution& l_e, const Vec& y,
                        double alpha, LabelMode mode, bool has_phrases);

// Gradients of the joint loss with respect to the head and the incoming
// representations, for one block. This is the unit the finite-difference
// checks exercise.
struct HeadGrads {
  Mat dw;                   // d × T
  Mat db;                   // 1 × T
  std::vector<Vec> dphrase; // one per phrase vector
  Vec dsummary;
};

LossBundle head_loss_and_grad(const LILHead& head, const Vec& summary,
                              const std::vector<Vec>& phrases, const Vec& y,
                              double alpha, ExplanationAgg agg,
                              HeadGrads* grads);

struct TrainConfig {
  int batch_size = 8;
  double lr = 2e-5;
  int epochs = 10;
  double alpha = 0.5;
  int head_dim = 64;  // encoder hidden size feeding the head
  double threshold = 0.5;
  std::uint64_t seed = 0;
  ExplanationAgg explanation_agg = ExplanationAgg::mean;

  int depth = 2;
  int heads = 4;
  int max_len = 512;
  int block_size = 512;
  int overlap = 128;
  int bpe_merges = 8000;
  bool nested_candidates = true;
  double dev_fraction = 0.1;
  double clip_norm = 1.0;

  void validate() const;
};

struct Model {
  BpeTokenizer tokenizer;
  EncoderParams encoder;
  LILHead head;
  TopicSchema schema;
  TrainConfig cfg;
};

// Runs the block through the tokenizer and encoder. With `cache` set the
// activations are kept for a backward pass.
BlockEncoding encode_block(const EncoderParams& enc,
                           const BpeTokenizer& tokenizer,
                           const TextBlock& block,
                           EncoderActs* cache = nullptr);

// Chunker + subtoken alignment for one encoded block; unencodable
// candidates are dropped.
std::vector<CandidatePhrase> block_candidates(const TextBlock& block,
                                              const BlockEncoding& enc,
                                              bool nested);

// Thresholded topic set from classifier scores: indices with score >=
// threshold, falling back to the argmax when none pass (multi-label);
// argmax with lowest-index ties (single-label).
std::set<int> predict_topic_indices(const LabelDistribution& scores,
                                    LabelMode mode, double threshold);

TopicLabelSet predict_topics(const Model& model, const TextBlock& block);

struct TrainLogEntry {
  int epoch = 0;
  double L = 0.0, L_y = 0.0, L_e = 0.0;
  double dev_weighted_f1 = 0.0;
  bool selected = false;  // became the checkpointed model
};

struct TrainResult {
  Model model;
  std::vector<TrainLogEntry> log;
};

// Adam over shuffled blocks with gradient-norm clipping; keeps the
// checkpoint with the best weighted topic F1 on a held-out document
// split (first best wins ties).
TrainResult train_model(const std::vector<Document>& docs,
                        const std::map<std::string, TopicLabelSet>& labels,
                        const TopicSchema& schema, const TrainConfig& cfg);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace keyspan

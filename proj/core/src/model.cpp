#include "keyspan/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "keyspan/errors.hpp"
#include "keyspan/metrics.hpp"
#include "keyspan/rng.hpp"

namespace keyspan {

namespace {

constexpr double kScoreEps = 1e-7;

double clamp_score(double x) {
  return std::min(1.0 - kScoreEps, std::max(kScoreEps, x));
}

Vec relu(const Vec& x) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Vec head_logits(const LILHead& head, const Vec& rep) {
  Vec logits(head.T());
  for (int t = 0; t < head.T(); ++t) {
    double s = head.b(0, t);
    for (int j = 0; j < head.d(); ++j) s += head.w(j, t) * rep[j];
    logits[t] = s;
  }
  return logits;
}

Vec apply_output_map(const Vec& logits, LabelMode mode) {
  Vec out(logits.size());
  if (mode == LabelMode::multi_label) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
      out[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    }
  } else {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      out[i] = std::exp(logits[i] - m);
      z += out[i];
    }
    for (double& v : out) v /= z;
  }
  return out;
}

// dL/dscores -> dL/dlogits through the output map.
Vec output_map_backward(const Vec& scores, const Vec& d_scores,
                        LabelMode mode) {
  const std::size_t T = scores.size();
  Vec d_logits(T, 0.0);
  if (mode == LabelMode::multi_label) {
    for (std::size_t j = 0; j < T; ++j) {
      d_logits[j] = d_scores[j] * scores[j] * (1.0 - scores[j]);
    }
  } else {
    double inner = 0.0;
    for (std::size_t k = 0; k < T; ++k) inner += d_scores[k] * scores[k];
    for (std::size_t j = 0; j < T; ++j) {
      d_logits[j] = scores[j] * (d_scores[j] - inner);
    }
  }
  return d_logits;
}

double cross_entropy(const Vec& scores, const Vec& y, LabelMode mode) {
  double L = 0.0;
  if (mode == LabelMode::single_label) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (y[j] > 0.0) L -= y[j] * std::log(clamp_score(scores[j]));
    }
  } else {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const double s = clamp_score(scores[j]);
      L -= y[j] * std::log(s) + (1.0 - y[j]) * std::log(1.0 - s);
    }
  }
  return L;
}

// Gradient of the cross-entropy in score space; zero where the clamp is
// active so it matches what a finite difference of the loss sees.
Vec cross_entropy_backward(const Vec& scores, const Vec& y, LabelMode mode) {
  Vec d(scores.size(), 0.0);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const double s = scores[j];
    if (s <= kScoreEps || s >= 1.0 - kScoreEps) continue;
    if (mode == LabelMode::single_label) {
      if (y[j] > 0.0) d[j] = -y[j] / s;
    } else {
      d[j] = -y[j] / s + (1.0 - y[j]) / (1.0 - s);
    }
  }
  return d;
}

}  // namespace

ExplanationAgg explanation_agg_from_string(const std::string& s) {
  if (s == "mean") return ExplanationAgg::mean;
  if (s == "sum_renormalized") return ExplanationAgg::sum_renormalized;
  throw ConfigError("unknown explanation aggregation '" + s +
                    "' (expected mean or sum_renormalized)");
}

const char* explanation_agg_name(ExplanationAgg a) {
  return a == ExplanationAgg::mean ? "mean" : "sum_renormalized";
}

Vec pool_phrase(const BlockEncoding& enc, const CandidatePhrase& cand) {
  if (cand.subtoken_indices.empty()) {
    throw ValidationError("cannot pool candidate '" + cand.surface +
                          "' with no aligned subtokens");
  }
  Vec out(enc.token_vectors.cols, 0.0);
  for (int idx : cand.subtoken_indices) {
    if (idx < 0 || idx >= enc.token_vectors.rows) {
      throw ValidationError("subtoken index " + std::to_string(idx) +
                            " out of range for encoding of " +
                            std::to_string(enc.token_vectors.rows) + " tokens");
    }
    const double* row = enc.token_vectors.row(idx);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
  }
  return out;
}

LabelDistribution lil_forward(const LILHead& head, const Vec& phrase,
                              const Vec& summary) {
  if (static_cast<int>(phrase.size()) != head.d() ||
      static_cast<int>(summary.size()) != head.d()) {
    throw ValidationError("representation dimension does not match head");
  }
  const Vec gp = relu(phrase);
  const Vec gs = relu(summary);
  Vec z(gp.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = gp[i] - gs[i];
  return apply_output_map(head_logits(head, z), head.mode);
}

LabelDistribution cls_forward(const LILHead& head, const Vec& summary) {
  if (static_cast<int>(summary.size()) != head.d()) {
    throw ValidationError("summary dimension does not match head");
  }
  return apply_output_map(head_logits(head, relu(summary)), head.mode);
}

LabelDistribution explanation_distribution(
    const std::vector<LabelDistribution>& phrase_dists, ExplanationAgg agg) {
  if (phrase_dists.empty()) {
    throw ValidationError("explanation distribution needs at least one phrase");
  }
  const std::size_t T = phrase_dists[0].size();
  Vec out(T, 0.0);
  for (const auto& d : phrase_dists) {
    if (d.size() != T) {
      throw ValidationError("phrase distributions disagree on topic count");
    }
    for (std::size_t j = 0; j < T; ++j) out[j] += d[j];
  }
  if (agg == ExplanationAgg::mean) {
    for (double& v : out) v /= static_cast<double>(phrase_dists.size());
  } else {
    double peak = 0.0;
    for (double v : out) peak = std::max(peak, v);
    if (peak > 1.0) {
      for (double& v : out) v /= peak;
    }
  }
  return out;
}

LossBundle compute_loss(const LabelDistribution& l_cls,
                        const LabelDistribution& l_e, const Vec& y,
                        double alpha, LabelMode mode, bool has_phrases) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
  }
  if (l_cls.size() != y.size() || (has_phrases && l_e.size() != y.size())) {
    throw ValidationError("distribution/label dimension mismatch in loss");
  }
  LossBundle out;
  out.alpha = alpha;
  out.L_y = cross_entropy(l_cls, y, mode);
  out.L_e = has_phrases ? cross_entropy(l_e, y, mode) : 0.0;
  out.L = (1.0 - alpha) * out.L_y + alpha * out.L_e;
  return out;
}

LossBundle head_loss_and_grad(const LILHead& head, const Vec& summary,
                              const std::vector<Vec>& phrases, const Vec& y,
                              double alpha, ExplanationAgg agg,
                              HeadGrads* grads) {
  const int d = head.d();
  const int T = head.T();
  if (static_cast<int>(y.size()) != T) {
    throw ValidationError("gold vector does not match topic count");
  }
  const std::size_t P = phrases.size();

  const Vec gs = relu(summary);
  const Vec cls_scores = apply_output_map(head_logits(head, gs), head.mode);

  std::vector<Vec> zs(P), phrase_scores(P);
  for (std::size_t i = 0; i < P; ++i) {
    const Vec gp = relu(phrases[i]);
    Vec z(d);
    for (int j = 0; j < d; ++j) z[j] = gp[j] - gs[j];
    phrase_scores[i] = apply_output_map(head_logits(head, z), head.mode);
    zs[i] = std::move(z);
  }

  Vec l_e;
  if (P > 0) l_e = explanation_distribution(phrase_scores, agg);
  const LossBundle bundle =
      compute_loss(cls_scores, l_e, y, alpha, head.mode, P > 0);
  if (!grads) return bundle;

  grads->dw = Mat(d, T);
  grads->db = Mat(1, T);
  grads->dphrase.assign(P, Vec(d, 0.0));
  grads->dsummary.assign(d, 0.0);

  // Classification term.
  Vec d_cls_scores = cross_entropy_backward(cls_scores, y, head.mode);
  for (double& v : d_cls_scores) v *= (1.0 - alpha);
  const Vec g_cls = output_map_backward(cls_scores, d_cls_scores, head.mode);

  Vec d_gs(d, 0.0);
  for (int t = 0; t < T; ++t) {
    const double gt = g_cls[t];
    if (gt == 0.0) continue;
    grads->db(0, t) += gt;
    for (int j = 0; j < d; ++j) {
      grads->dw(j, t) += gs[j] * gt;
      d_gs[j] += head.w(j, t) * gt;
    }
  }

  // Explanation term, distributed through the aggregation.
  if (P > 0 && alpha > 0.0) {
    Vec d_le = cross_entropy_backward(l_e, y, head.mode);
    for (double& v : d_le) v *= alpha;

    // d l_e / d phrase_scores under the chosen aggregation.
    std::vector<Vec> d_scores(P, Vec(T, 0.0));
    if (agg == ExplanationAgg::mean) {
      const double inv = 1.0 / static_cast<double>(P);
      for (std::size_t i = 0; i < P; ++i) {
        for (int t = 0; t < T; ++t) d_scores[i][t] = d_le[t] * inv;
      }
    } else {
      Vec sum(T, 0.0);
      for (const auto& s : phrase_scores) {
        for (int t = 0; t < T; ++t) sum[t] += s[t];
      }
      double peak = 0.0;
      int peak_idx = 0;
      for (int t = 0; t < T; ++t) {
        if (sum[t] > peak) {
          peak = sum[t];
          peak_idx = t;
        }
      }
      if (peak > 1.0) {
        // l_e = sum / peak; the peak component also moves the scale.
        double inner = 0.0;
        for (int t = 0; t < T; ++t) inner += d_le[t] * sum[t];
        for (std::size_t i = 0; i < P; ++i) {
          for (int t = 0; t < T; ++t) {
            double v = d_le[t] / peak;
            if (t == peak_idx) v -= inner / (peak * peak);
            d_scores[i][t] = v;
          }
        }
      } else {
        for (std::size_t i = 0; i < P; ++i) d_scores[i] = d_le;
      }
    }

    for (std::size_t i = 0; i < P; ++i) {
      const Vec g_i =
          output_map_backward(phrase_scores[i], d_scores[i], head.mode);
      Vec d_gp(d, 0.0);
      for (int t = 0; t < T; ++t) {
        const double gt = g_i[t];
        if (gt == 0.0) continue;
        grads->db(0, t) += gt;
        for (int j = 0; j < d; ++j) {
          grads->dw(j, t) += zs[i][j] * gt;
          const double wg = head.w(j, t) * gt;
          d_gp[j] += wg;
          d_gs[j] -= wg;  // z = g(phrase) - g(summary)
        }
      }
      for (int j = 0; j < d; ++j) {
        grads->dphrase[i][j] = phrases[i][j] > 0.0 ? d_gp[j] : 0.0;
      }
    }
  }

  for (int j = 0; j < d; ++j) {
    grads->dsummary[j] = summary[j] > 0.0 ? d_gs[j] : 0.0;
  }
  return bundle;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0,1]");
  if (head_dim < 1) throw ConfigError("head_dim must be positive");
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("prediction threshold must lie in [0,1]");
  }
  if (depth < 1 || heads < 1) throw ConfigError("encoder shape must be positive");
  if (head_dim % heads != 0) {
    throw ConfigError("head_dim must be divisible by the head count");
  }
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  if (overlap < 0 || block_size <= overlap) {
    throw ConfigError("block_size must exceed overlap");
  }
  if (bpe_merges < 0) throw ConfigError("bpe_merges must be non-negative");
  if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
    throw ConfigError("dev_fraction must lie in [0,1)");
  }
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
}

BlockEncoding encode_block(const EncoderParams& enc,
                           const BpeTokenizer& tokenizer,
                           const TextBlock& block, EncoderActs* cache) {
  if (block.words.empty()) {
    throw ValidationError("cannot encode empty block " + block.doc_id + "#" +
                          std::to_string(block.block_index));
  }
  BpeTokenizer::Encoded body = tokenizer.encode(block.words, block.char_offset);
  const std::size_t limit = static_cast<std::size_t>(enc.cfg.max_len) - 1;
  if (body.ids.size() > limit) {
    body.ids.resize(limit);
    body.spans.resize(limit);
  }
  std::vector<int> ids;
  ids.reserve(body.ids.size() + 1);
  ids.push_back(BpeTokenizer::kCls);
  ids.insert(ids.end(), body.ids.begin(), body.ids.end());

  const Mat y = encoder_forward(enc, ids, cache);
  BlockEncoding out;
  out.summary_vector.assign(y.row(0), y.row(0) + y.cols);
  out.token_vectors = Mat(y.rows - 1, y.cols);
  for (int i = 1; i < y.rows; ++i) {
    std::memcpy(out.token_vectors.row(i - 1), y.row(i),
                sizeof(double) * y.cols);
  }
  out.subtoken_spans = std::move(body.spans);
  return out;
}

std::vector<CandidatePhrase> block_candidates(const TextBlock& block,
                                              const BlockEncoding& enc,
                                              bool nested) {
  const PosTaggedBlock tags = tag_block(block);
  const std::vector<CandidatePhrase> raw =
      nested ? extract_candidates(block, tags)
             : extract_candidates_maximal(block, tags);
  std::vector<CandidatePhrase> out;
  out.reserve(raw.size());
  for (const auto& cand : raw) {
    const auto extent =
        block_char_extent(block, cand.word_start, cand.word_end);
    CandidatePhrase aligned =
        align_subtokens(cand, extent, enc.subtoken_spans);
    if (!aligned.unencodable) out.push_back(std::move(aligned));
  }
  return out;
}

std::set<int> predict_topic_indices(const LabelDistribution& scores,
                                    LabelMode mode, double threshold) {
  if (scores.empty()) return {};
  int argmax = 0;
  for (std::size_t t = 1; t < scores.size(); ++t) {
    if (scores[t] > scores[argmax]) argmax = static_cast<int>(t);
  }
  std::set<int> out;
  if (mode == LabelMode::single_label) {
    out.insert(argmax);
    return out;
  }
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (scores[t] >= threshold) out.insert(static_cast<int>(t));
  }
  if (out.empty()) out.insert(argmax);
  return out;
}

TopicLabelSet predict_topics(const Model& model, const TextBlock& block) {
  const BlockEncoding enc =
      encode_block(model.encoder, model.tokenizer, block);
  const LabelDistribution scores =
      cls_forward(model.head, enc.summary_vector);
  TopicLabelSet out;
  for (int t :
       predict_topic_indices(scores, model.head.mode, model.cfg.threshold)) {
    out.insert(model.schema.topic_ids[t]);
  }
  return out;
}

namespace {

struct AdamState {
  std::vector<Mat> m, v;
  long step = 0;
};

void adam_step(const std::vector<Mat*>& params, const std::vector<Mat*>& grads,
               AdamState& state, double lr, double clip_norm) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (state.m.empty()) {
    for (const Mat* p : params) {
      state.m.emplace_back(p->rows, p->cols);
      state.v.emplace_back(p->rows, p->cols);
    }
  }
  double norm_sq = 0.0;
  for (const Mat* g : grads) {
    for (double x : g->a) norm_sq += x * x;
  }
  const double norm = std::sqrt(norm_sq);
  double scale = 1.0;
  if (clip_norm > 0.0 && norm > clip_norm) scale = clip_norm / norm;

  ++state.step;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat& p = *params[i];
    const Mat& g = *grads[i];
    Mat& m = state.m[i];
    Mat& v = state.v[i];
    for (std::size_t t = 0; t < p.a.size(); ++t) {
      const double gt = g.a[t] * scale;
      m.a[t] = b1 * m.a[t] + (1.0 - b1) * gt;
      v.a[t] = b2 * v.a[t] + (1.0 - b2) * gt * gt;
      const double mhat = m.a[t] / bc1;
      const double vhat = v.a[t] / bc2;
      p.a[t] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

struct TrainItem {
  TextBlock block;
  Vec y;
};

}  // namespace

TrainResult train_model(const std::vector<Document>& docs,
                        const std::map<std::string, TopicLabelSet>& labels,
                        const TopicSchema& schema, const TrainConfig& cfg) {
  cfg.validate();
  schema.validate();

  std::vector<const Document*> labeled;
  for (const auto& doc : docs) {
    if (labels.count(doc.doc_id) && !doc.words.empty()) {
      labeled.push_back(&doc);
    }
  }
  if (labeled.empty()) {
    throw ValidationError("no labeled non-empty documents to train on");
  }

  TrainResult result;
  Model& model = result.model;
  model.schema = schema;
  model.cfg = cfg;

  std::vector<Document> tokenizer_corpus;
  tokenizer_corpus.reserve(labeled.size());
  for (const Document* doc : labeled) tokenizer_corpus.push_back(*doc);
  model.tokenizer = BpeTokenizer::train(tokenizer_corpus, cfg.bpe_merges);

  EncoderConfig ecfg;
  ecfg.depth = cfg.depth;
  ecfg.d = cfg.head_dim;
  ecfg.heads = cfg.heads;
  ecfg.vocab = model.tokenizer.vocab_size();
  ecfg.max_len = cfg.max_len;
  Rng init_rng(Rng::derive(cfg.seed, 1));
  model.encoder = EncoderParams::init(ecfg, init_rng);
  model.head.mode = schema.mode;
  model.head.w = Mat(ecfg.d, schema.T());
  model.head.b = Mat(1, schema.T());
  Rng head_rng(Rng::derive(cfg.seed, 2));
  for (double& x : model.head.w.a) x = head_rng.normal(0.0, 0.02);

  // Document-level dev split for model selection.
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(Rng::derive(cfg.seed, 3));
  split_rng.shuffle(order);
  std::size_t n_dev = 0;
  if (cfg.dev_fraction > 0.0 && labeled.size() >= 2) {
    n_dev = static_cast<std::size_t>(
        std::floor(cfg.dev_fraction * static_cast<double>(labeled.size()) + 0.5));
    n_dev = std::max<std::size_t>(1, std::min(n_dev, labeled.size() - 1));
  }
  std::vector<const Document*> dev_docs, train_docs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_dev ? dev_docs : train_docs).push_back(labeled[order[i]]);
  }

  auto indicator = [&](const std::string& doc_id) {
    Vec y(schema.T(), 0.0);
    for (const auto& t : labels.at(doc_id)) {
      const int idx = schema.index_of(t);
      if (idx < 0) {
        throw ValidationError("doc " + doc_id + ": topic '" + t +
                              "' not in schema");
      }
      y[idx] = 1.0;
    }
    return y;
  };

  std::vector<TrainItem> items;
  for (const Document* doc : train_docs) {
    const Vec y = indicator(doc->doc_id);
    for (TextBlock& block : split_blocks(*doc, cfg.block_size, cfg.overlap)) {
      items.push_back({std::move(block), y});
    }
  }
  if (items.empty()) throw ValidationError("no labeled blocks to train on");

  // Optimizer over every encoder tensor plus the head.
  std::vector<Mat*> params;
  for (auto& t : model.encoder.tensors()) params.push_back(t.mat);
  params.push_back(&model.head.w);
  params.push_back(&model.head.b);
  AdamState adam;

  auto dev_weighted_f1 = [&]() {
    if (dev_docs.empty()) return 0.0;
    std::map<std::string, TopicLabelSet> pred, gold;
    for (const Document* doc : dev_docs) {
      TopicLabelSet set;
      for (const TextBlock& block :
           split_blocks(*doc, cfg.block_size, cfg.overlap)) {
        for (const auto& t : predict_topics(model, block)) set.insert(t);
      }
      pred[doc->doc_id] = std::move(set);
      gold[doc->doc_id] = labels.at(doc->doc_id);
    }
    return topic_f1(pred, gold, schema).weighted_f1;
  };

  Model best;
  double best_f1 = -1.0;
  int best_epoch = -1;
  const bool use_dev = !dev_docs.empty();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng(Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> idx(items.size());
    std::iota(idx.begin(), idx.end(), 0);
    epoch_rng.shuffle(idx);

    double sum_L = 0.0, sum_Ly = 0.0, sum_Le = 0.0;
    std::size_t pos = 0;
    while (pos < idx.size()) {
      const std::size_t batch_end =
          std::min(idx.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);

      EncoderParams enc_grads = EncoderParams::zeros_like(model.encoder);
      Mat dw(model.head.w.rows, model.head.w.cols);
      Mat db(1, model.head.b.cols);

      for (std::size_t bi = pos; bi < batch_end; ++bi) {
        const TrainItem& item = items[idx[bi]];
        EncoderActs acts;
        const BlockEncoding enc =
            encode_block(model.encoder, model.tokenizer, item.block, &acts);
        const std::vector<CandidatePhrase> cands =
            block_candidates(item.block, enc, cfg.nested_candidates);

        std::vector<Vec> phrase_vecs;
        phrase_vecs.reserve(cands.size());
        for (const auto& c : cands) phrase_vecs.push_back(pool_phrase(enc, c));

        HeadGrads hg;
        const LossBundle bundle =
            head_loss_and_grad(model.head, enc.summary_vector, phrase_vecs,
                               item.y, cfg.alpha, cfg.explanation_agg, &hg);
        if (!std::isfinite(bundle.L)) {
          throw RuntimeFailure("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
        }
        sum_L += bundle.L;
        sum_Ly += bundle.L_y;
        sum_Le += bundle.L_e;

        for (std::size_t t = 0; t < dw.a.size(); ++t) {
          dw.a[t] += hg.dw.a[t] * inv_batch;
        }
        for (std::size_t t = 0; t < db.a.size(); ++t) {
          db.a[t] += hg.db.a[t] * inv_batch;
        }

        // Route representation gradients back through the encoder. Row 0
        // of the forward output is the summary slot; body token i sits at
        // row i + 1.
        Mat d_y(acts.y.rows, acts.y.cols);
        for (int j = 0; j < d_y.cols; ++j) {
          d_y(0, j) = hg.dsummary[j] * inv_batch;
        }
        for (std::size_t ci = 0; ci < cands.size(); ++ci) {
          for (int tok : cands[ci].subtoken_indices) {
            double* row = d_y.row(tok + 1);
            for (int j = 0; j < d_y.cols; ++j) {
              row[j] += hg.dphrase[ci][j] * inv_batch;
            }
          }
        }
        encoder_backward(model.encoder, acts, d_y, enc_grads);
      }

      std::vector<Mat*> grads;
      for (auto& t : enc_grads.tensors()) grads.push_back(t.mat);
      grads.push_back(&dw);
      grads.push_back(&db);
      adam_step(params, grads, adam, cfg.lr, cfg.clip_norm);
      pos = batch_end;
    }

    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.L = sum_L / static_cast<double>(items.size());
    entry.L_y = sum_Ly / static_cast<double>(items.size());
    entry.L_e = sum_Le / static_cast<double>(items.size());
    if (use_dev) {
      entry.dev_weighted_f1 = dev_weighted_f1();
      if (entry.dev_weighted_f1 > best_f1) {
        best_f1 = entry.dev_weighted_f1;
        best = model;
        best_epoch = epoch;
      }
    }
    result.log.push_back(entry);
  }

  if (use_dev && best_epoch > 0) {
    result.model = std::move(best);
    result.log[static_cast<std::size_t>(best_epoch) - 1].selected = true;
  } else if (!result.log.empty()) {
    result.log.back().selected = true;
  }
  return result;
}

namespace {

constexpr char kMagic[4] = {'K', 'S', 'P', 'N'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw ValidationError("truncated checkpoint: " + path);
  }
  return v;
}

std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw ValidationError("truncated checkpoint: " + path);
  }
  return v;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["alpha"] = cfg.alpha;
  j["head_dim"] = cfg.head_dim;
  j["threshold"] = cfg.threshold;
  j["seed"] = cfg.seed;
  j["explanation_agg"] = explanation_agg_name(cfg.explanation_agg);
  j["depth"] = cfg.depth;
  j["heads"] = cfg.heads;
  j["max_len"] = cfg.max_len;
  j["block_size"] = cfg.block_size;
  j["overlap"] = cfg.overlap;
  j["bpe_merges"] = cfg.bpe_merges;
  j["nested_candidates"] = cfg.nested_candidates;
  j["dev_fraction"] = cfg.dev_fraction;
  j["clip_norm"] = cfg.clip_norm;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.head_dim = j.at("head_dim").get<int>();
  cfg.threshold = j.at("threshold").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.explanation_agg =
      explanation_agg_from_string(j.at("explanation_agg").get<std::string>());
  cfg.depth = j.at("depth").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.block_size = j.at("block_size").get<int>();
  cfg.overlap = j.at("overlap").get<int>();
  cfg.bpe_merges = j.at("bpe_merges").get<int>();
  cfg.nested_candidates = j.at("nested_candidates").get<bool>();
  cfg.dev_fraction = j.at("dev_fraction").get<double>();
  cfg.clip_norm = j.at("clip_norm").get<double>();
  return cfg;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);

  nlohmann::ordered_json meta;
  meta["schema"] = {{"topic_ids", model.schema.topic_ids},
                    {"mode", label_mode_name(model.schema.mode)}};
  meta["train_config"] = train_config_to_json(model.cfg);
  meta["encoder"] = {{"depth", model.encoder.cfg.depth},
                     {"d", model.encoder.cfg.d},
                     {"heads", model.encoder.cfg.heads},
                     {"ff_mult", model.encoder.cfg.ff_mult},
                     {"vocab", model.encoder.cfg.vocab},
                     {"max_len", model.encoder.cfg.max_len}};
  meta["tokenizer"] = nlohmann::ordered_json::parse(model.tokenizer.to_json());
  const std::string meta_str = meta.dump();
  write_u64(out, meta_str.size());
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  std::vector<std::pair<std::string, const Mat*>> tensors;
  for (const auto& t : model.encoder.tensors()) tensors.emplace_back(t.name, t.mat);
  tensors.emplace_back("head.w", &model.head.w);
  tensors.emplace_back("head.b", &model.head.b);

  write_u64(out, tensors.size());
  for (const auto& [name, mat] : tensors) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(mat->rows));
    write_u32(out, static_cast<std::uint32_t>(mat->cols));
    out.write(reinterpret_cast<const char*>(mat->a.data()),
              static_cast<std::streamsize>(mat->a.size() * sizeof(double)));
  }
  if (!out) throw RuntimeFailure("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("not a checkpoint file: " + path);
  }
  const std::uint32_t version = read_u32(in, path);
  if (version != kVersion) {
    throw ValidationError("unsupported checkpoint version " +
                          std::to_string(version) + " in " + path);
  }
  const std::uint64_t meta_len = read_u64(in, path);
  std::string meta_str(meta_len, '\0');
  if (!in.read(meta_str.data(), static_cast<std::streamsize>(meta_len))) {
    throw ValidationError("truncated checkpoint: " + path);
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("corrupt checkpoint metadata: " +
                          std::string(e.what()));
  }

  Model model;
  model.schema.topic_ids =
      meta.at("schema").at("topic_ids").get<std::vector<std::string>>();
  model.schema.mode =
      label_mode_from_string(meta.at("schema").at("mode").get<std::string>());
  model.cfg = train_config_from_json(meta.at("train_config"));
  model.tokenizer = BpeTokenizer::from_json(meta.at("tokenizer").dump());

  EncoderConfig ecfg;
  const auto& je = meta.at("encoder");
  ecfg.depth = je.at("depth").get<int>();
  ecfg.d = je.at("d").get<int>();
  ecfg.heads = je.at("heads").get<int>();
  ecfg.ff_mult = je.at("ff_mult").get<int>();
  ecfg.vocab = je.at("vocab").get<int>();
  ecfg.max_len = je.at("max_len").get<int>();
  Rng throwaway(0);
  model.encoder = EncoderParams::init(ecfg, throwaway);
  model.head.mode = model.schema.mode;
  model.head.w = Mat(ecfg.d, model.schema.T());
  model.head.b = Mat(1, model.schema.T());

  std::map<std::string, Mat*> by_name;
  for (auto& t : model.encoder.tensors()) by_name[t.name] = t.mat;
  by_name["head.w"] = &model.head.w;
  by_name["head.b"] = &model.head.b;

  const std::uint64_t count = read_u64(in, path);
  if (count != by_name.size()) {
    throw ValidationError("checkpoint tensor count mismatch in " + path);
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw ValidationError("truncated checkpoint: " + path);
    }
    const std::uint32_t rows = read_u32(in, path);
    const std::uint32_t cols = read_u32(in, path);
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ValidationError("unknown tensor '" + name + "' in " + path);
    }
    Mat& m = *it->second;
    if (static_cast<int>(rows) != m.rows || static_cast<int>(cols) != m.cols) {
      throw ValidationError("tensor '" + name + "' has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            ", expected " + std::to_string(m.rows) + "x" +
                            std::to_string(m.cols));
    }
    if (!in.read(reinterpret_cast<char*>(m.a.data()),
                 static_cast<std::streamsize>(m.a.size() * sizeof(double)))) {
      throw ValidationError("truncated checkpoint: " + path);
    }
  }
  return model;
}

}  // namespace keyspan

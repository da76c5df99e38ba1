#include "keyspan/extraction.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"
#include "keyspan/errors.hpp"

namespace keyspan {

std::vector<RelevanceScore> score_phrase(const LabelDistribution& l_cls,
                                         const LabelDistribution& l_i,
                                         const std::set<int>& predicted,
                                         const TopicSchema& schema) {
  if (l_cls.size() != l_i.size() ||
      static_cast<int>(l_cls.size()) != schema.T()) {
    throw ValidationError("distribution sizes disagree with schema in scoring");
  }
  std::vector<RelevanceScore> out;
  out.reserve(predicted.size());
  for (int y : predicted) {
    if (y < 0 || y >= schema.T()) {
      throw ValidationError("predicted topic index " + std::to_string(y) +
                            " outside schema");
    }
    out.push_back({schema.topic_ids[y], l_cls[y] - l_i[y]});
  }
  return out;
}

std::vector<ScoredCandidate> select_keyphrases(
    const std::vector<ScoredCandidate>& scored) {
  std::vector<ScoredCandidate> out;
  for (const auto& sc : scored) {
    bool positive = false;
    for (const auto& rs : sc.scores) {
      if (rs.value > 0.0) {
        positive = true;
        break;
      }
    }
    if (positive) out.push_back(sc);
  }
  return out;
}

std::vector<KeyphrasePrediction> aggregate_document(
    const std::string& doc_id,
    const std::vector<std::pair<TextBlock const*, std::vector<ScoredCandidate>>>&
        block_selections) {
  // Global span -> (surface, per-topic max relevance).
  std::map<std::pair<int, int>, std::pair<std::string, std::map<std::string, double>>>
      merged;
  for (const auto& [block, selections] : block_selections) {
    for (const auto& sc : selections) {
      const int gs = to_global(*block, sc.cand.word_start);
      const int ge = gs + (sc.cand.word_end - sc.cand.word_start);
      auto& slot = merged[{gs, ge}];
      slot.first = sc.cand.surface;
      for (const auto& rs : sc.scores) {
        auto [it, inserted] = slot.second.try_emplace(rs.topic, rs.value);
        if (!inserted) it->second = std::max(it->second, rs.value);
      }
    }
  }
  std::vector<KeyphrasePrediction> out;
  out.reserve(merged.size());
  for (const auto& [span, payload] : merged) {
    KeyphrasePrediction p;
    p.doc_id = doc_id;
    p.word_start = span.first;
    p.word_end = span.second;
    p.surface = payload.first;
    p.best_relevance = -1.0;
    for (const auto& [topic, value] : payload.second) {
      p.per_topic.push_back({topic, value});
      p.best_relevance = std::max(p.best_relevance, value);
    }
    out.push_back(std::move(p));
  }
  return out;  // map iteration is already (word_start, word_end) order
}

std::vector<KeyphrasePrediction> extract(const Model& model,
                                         const Document& doc,
                                         const ExtractOptions& opt) {
  const std::vector<TextBlock> blocks =
      split_blocks(doc, model.cfg.block_size, model.cfg.overlap);
  std::vector<std::pair<TextBlock const*, std::vector<ScoredCandidate>>>
      selections;
  for (const TextBlock& block : blocks) {
    const BlockEncoding enc =
        encode_block(model.encoder, model.tokenizer, block);
    const LabelDistribution l_cls = cls_forward(model.head, enc.summary_vector);
    const std::set<int> predicted =
        predict_topic_indices(l_cls, model.head.mode, model.cfg.threshold);
    if (predicted.empty()) continue;

    std::vector<CandidatePhrase> cands;
    bool have_external = false;
    if (opt.external) {
      const auto it = opt.external->find({block.doc_id, block.block_index});
      if (it != opt.external->end()) {
        have_external = true;
        for (const auto& raw : it->second) {
          const auto extent =
              block_char_extent(block, raw.word_start, raw.word_end);
          CandidatePhrase aligned =
              align_subtokens(raw, extent, enc.subtoken_spans);
          if (!aligned.unencodable) cands.push_back(std::move(aligned));
        }
      }
    }
    if (!have_external) {
      cands = block_candidates(block, enc, opt.nested_candidates);
    }

    std::vector<ScoredCandidate> scored;
    scored.reserve(cands.size());
    for (const auto& cand : cands) {
      const Vec pooled = pool_phrase(enc, cand);
      const LabelDistribution l_i =
          lil_forward(model.head, pooled, enc.summary_vector);
      scored.push_back({cand, score_phrase(l_cls, l_i, predicted, model.schema)});
    }
    selections.emplace_back(&block, select_keyphrases(scored));
  }
  return aggregate_document(doc.doc_id, selections);
}

void save_predictions(const std::vector<KeyphrasePrediction>& preds,
                      const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write predictions: " + path);
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["doc_id"] = p.doc_id;
    j["word_start"] = p.word_start;
    j["word_end"] = p.word_end;
    j["surface"] = p.surface;
    nlohmann::ordered_json topics = nlohmann::ordered_json::array();
    for (const auto& rs : p.per_topic) {
      topics.push_back({{"topic", rs.topic}, {"r", rs.value}});
    }
    j["per_topic"] = std::move(topics);
    j["best_relevance"] = p.best_relevance;
    out << j.dump() << "\n";
  }
  if (!out) throw RuntimeFailure("write failed: " + path);
}

std::vector<KeyphrasePrediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open predictions: " + path);
  std::vector<KeyphrasePrediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    KeyphrasePrediction p;
    try {
      p.doc_id = j.at("doc_id").get<std::string>();
      p.word_start = j.at("word_start").get<int>();
      p.word_end = j.at("word_end").get<int>();
      p.surface = j.value("surface", std::string());
      if (j.contains("per_topic")) {
        for (const auto& t : j["per_topic"]) {
          p.per_topic.push_back(
              {t.at("topic").get<std::string>(), t.at("r").get<double>()});
        }
      }
      p.best_relevance = j.value("best_relevance", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, lineno, std::string("bad prediction record: ") + e.what());
    }
    if (p.word_start < 0 || p.word_start >= p.word_end) {
      throw ParseError(path, lineno, "invalid span in prediction record");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace keyspan

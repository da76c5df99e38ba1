#include "keyspan/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "keyspan/errors.hpp"

namespace keyspan {

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Span> dedup(std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  return spans;
}

bool overlaps(const Span& a, const Span& b) {
  return a.first < b.second && b.first < a.second;
}

double f1_of(double p, double r) {
  return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

PRF prf_from_counts(long pred_hits, long gold_hits, long n_pred, long n_gold) {
  PRF out;
  out.p = n_pred > 0 ? static_cast<double>(pred_hits) / n_pred : 0.0;
  out.r = n_gold > 0 ? static_cast<double>(gold_hits) / n_gold : 0.0;
  out.f1 = f1_of(out.p, out.r);
  return out;
}

std::set<std::string> all_doc_ids(const SpanSets& pred, const SpanSets& gold) {
  std::set<std::string> ids;
  for (const auto& [id, spans] : pred) {
    (void)spans;
    ids.insert(id);
  }
  for (const auto& [id, spans] : gold) {
    (void)spans;
    ids.insert(id);
  }
  return ids;
}

}  // namespace

PartialMatchVariant partial_variant_from_string(const std::string& s) {
  if (s == "any_overlap") return PartialMatchVariant::any_overlap;
  if (s == "one_to_one") return PartialMatchVariant::one_to_one;
  throw ConfigError("unknown partial-match variant '" + s +
                    "' (expected any_overlap or one_to_one)");
}

const char* partial_variant_name(PartialMatchVariant v) {
  return v == PartialMatchVariant::any_overlap ? "any_overlap" : "one_to_one";
}

PRF exact_match_f1(const SpanSets& pred, const SpanSets& gold,
                   int* docs_skipped) {
  long tp = 0, n_pred = 0, n_gold = 0;
  int skipped = 0;
  for (const auto& doc_id : all_doc_ids(pred, gold)) {
    const auto git = gold.find(doc_id);
    const std::vector<Span> g =
        git == gold.end() ? std::vector<Span>{} : dedup(git->second);
    if (g.empty()) {
      ++skipped;
      continue;
    }
    const auto pit = pred.find(doc_id);
    const std::vector<Span> p =
        pit == pred.end() ? std::vector<Span>{} : dedup(pit->second);
    const std::set<Span> gold_set(g.begin(), g.end());
    for (const auto& span : p) {
      if (gold_set.count(span)) ++tp;
    }
    n_pred += static_cast<long>(p.size());
    n_gold += static_cast<long>(g.size());
  }
  if (docs_skipped) *docs_skipped = skipped;
  return prf_from_counts(tp, tp, n_pred, n_gold);
}

PRF partial_match_f1(const SpanSets& pred, const SpanSets& gold,
                     PartialMatchVariant variant, int* docs_skipped) {
  long pred_hits = 0, gold_hits = 0, n_pred = 0, n_gold = 0;
  int skipped = 0;
  for (const auto& doc_id : all_doc_ids(pred, gold)) {
    const auto git = gold.find(doc_id);
    const std::vector<Span> g =
        git == gold.end() ? std::vector<Span>{} : dedup(git->second);
    if (g.empty()) {
      ++skipped;
      continue;
    }
    const auto pit = pred.find(doc_id);
    const std::vector<Span> p =
        pit == pred.end() ? std::vector<Span>{} : dedup(pit->second);
    n_pred += static_cast<long>(p.size());
    n_gold += static_cast<long>(g.size());

    if (variant == PartialMatchVariant::any_overlap) {
      for (const auto& ps : p) {
        for (const auto& gs : g) {
          if (overlaps(ps, gs)) {
            ++pred_hits;
            break;
          }
        }
      }
      for (const auto& gs : g) {
        for (const auto& ps : p) {
          if (overlaps(ps, gs)) {
            ++gold_hits;
            break;
          }
        }
      }
    } else {
      // Greedy one-to-one: largest word overlap first, deterministic ties.
      struct Pair {
        long olap;
        std::size_t pi, gi;
      };
      std::vector<Pair> pairs;
      for (std::size_t pi = 0; pi < p.size(); ++pi) {
        for (std::size_t gi = 0; gi < g.size(); ++gi) {
          if (!overlaps(p[pi], g[gi])) continue;
          const long olap = std::min(p[pi].second, g[gi].second) -
                            std::max(p[pi].first, g[gi].first);
          pairs.push_back({olap, pi, gi});
        }
      }
      std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.olap != b.olap) return a.olap > b.olap;
        if (a.pi != b.pi) return a.pi < b.pi;
        return a.gi < b.gi;
      });
      std::vector<bool> p_used(p.size(), false), g_used(g.size(), false);
      long matched = 0;
      for (const auto& pr : pairs) {
        if (p_used[pr.pi] || g_used[pr.gi]) continue;
        p_used[pr.pi] = true;
        g_used[pr.gi] = true;
        ++matched;
      }
      pred_hits += matched;
      gold_hits += matched;
    }
  }
  if (docs_skipped) *docs_skipped = skipped;
  return prf_from_counts(pred_hits, gold_hits, n_pred, n_gold);
}

SpanMatchReport span_report(const SpanSets& pred, const SpanSets& gold,
                            const std::optional<TypedSpanSets>& typed_gold,
                            PartialMatchVariant variant) {
  SpanMatchReport report;
  int skipped = 0;
  report.exact = exact_match_f1(pred, gold, &skipped);
  report.docs_skipped_no_gold = skipped;
  report.partial = partial_match_f1(pred, gold, variant);
  report.avg_f1 = 0.5 * (report.exact.f1 + report.partial.f1);
  for (const auto& [doc_id, spans] : pred) {
    (void)doc_id;
    report.n_pred += static_cast<long>(dedup(spans).size());
  }
  for (const auto& [doc_id, spans] : gold) {
    (void)doc_id;
    report.n_gold += static_cast<long>(dedup(spans).size());
  }

  if (typed_gold) {
    // Recall per gold type; predictions carry no types.
    std::set<std::string> types;
    for (const auto& [doc_id, spans] : *typed_gold) {
      (void)doc_id;
      for (const auto& gs : spans) {
        types.insert(gs.type_label.empty() ? "untyped" : gs.type_label);
      }
    }
    for (const auto& type : types) {
      long exact_hits = 0, partial_hits = 0, total = 0;
      for (const auto& [doc_id, spans] : *typed_gold) {
        const auto pit = pred.find(doc_id);
        const std::vector<Span> p =
            pit == pred.end() ? std::vector<Span>{} : dedup(pit->second);
        const std::set<Span> pred_set(p.begin(), p.end());
        for (const auto& gs : spans) {
          const std::string label =
              gs.type_label.empty() ? "untyped" : gs.type_label;
          if (label != type) continue;
          ++total;
          const Span span{gs.word_start, gs.word_end};
          if (pred_set.count(span)) ++exact_hits;
          for (const auto& ps : p) {
            if (overlaps(ps, span)) {
              ++partial_hits;
              break;
            }
          }
        }
      }
      if (total > 0) {
        report.per_type_recall[type] = {
            static_cast<double>(exact_hits) / total,
            static_cast<double>(partial_hits) / total};
      }
    }
  }
  return report;
}

TopicF1Report topic_f1(const std::map<std::string, TopicLabelSet>& pred,
                       const std::map<std::string, TopicLabelSet>& gold,
                       const TopicSchema& schema) {
  const int T = schema.T();
  std::vector<long> tp(T, 0), fp(T, 0), fn(T, 0);
  std::set<std::string> doc_ids;
  for (const auto& [id, labels] : pred) {
    (void)labels;
    doc_ids.insert(id);
  }
  for (const auto& [id, labels] : gold) {
    (void)labels;
    doc_ids.insert(id);
  }
  for (const auto& doc_id : doc_ids) {
    const auto git = gold.find(doc_id);
    const auto pit = pred.find(doc_id);
    static const TopicLabelSet kEmpty;
    const TopicLabelSet& g = git == gold.end() ? kEmpty : git->second;
    const TopicLabelSet& p = pit == pred.end() ? kEmpty : pit->second;
    for (int t = 0; t < T; ++t) {
      const bool in_g = g.count(schema.topic_ids[t]) > 0;
      const bool in_p = p.count(schema.topic_ids[t]) > 0;
      if (in_g && in_p) ++tp[t];
      else if (in_p) ++fp[t];
      else if (in_g) ++fn[t];
    }
  }

  TopicF1Report report;
  long tp_all = 0, fp_all = 0, fn_all = 0;
  double macro_sum = 0.0, weighted_sum = 0.0;
  long support_total = 0;
  for (int t = 0; t < T; ++t) {
    tp_all += tp[t];
    fp_all += fp[t];
    fn_all += fn[t];
    const long support = tp[t] + fn[t];
    const double p = (tp[t] + fp[t]) > 0
                         ? static_cast<double>(tp[t]) / (tp[t] + fp[t])
                         : 0.0;
    const double r = support > 0 ? static_cast<double>(tp[t]) / support : 0.0;
    const double f1 = f1_of(p, r);
    macro_sum += f1;
    weighted_sum += f1 * static_cast<double>(support);
    support_total += support;
  }
  const double micro_p =
      (tp_all + fp_all) > 0 ? static_cast<double>(tp_all) / (tp_all + fp_all)
                            : 0.0;
  const double micro_r =
      (tp_all + fn_all) > 0 ? static_cast<double>(tp_all) / (tp_all + fn_all)
                            : 0.0;
  report.micro_f1 = f1_of(micro_p, micro_r);
  report.macro_f1 = T > 0 ? macro_sum / T : 0.0;
  report.weighted_f1 =
      support_total > 0 ? weighted_sum / static_cast<double>(support_total) : 0.0;
  return report;
}

std::vector<Span> spanize_phrase_list(const Document& doc,
                                      const std::vector<std::string>& phrases) {
  std::vector<std::string> words_lower;
  words_lower.reserve(doc.words.size());
  for (const auto& w : doc.words) words_lower.push_back(lowercase(w.surface));

  std::vector<Span> out;
  std::set<Span> seen;
  for (const auto& phrase : phrases) {
    // Split the lowercased phrase on whitespace.
    std::vector<std::string> parts;
    const std::string lower = lowercase(phrase);
    std::size_t i = 0;
    while (i < lower.size()) {
      while (i < lower.size() && std::isspace(static_cast<unsigned char>(lower[i]))) ++i;
      std::size_t j = i;
      while (j < lower.size() && !std::isspace(static_cast<unsigned char>(lower[j]))) ++j;
      if (j > i) parts.push_back(lower.substr(i, j - i));
      i = j;
    }
    if (parts.empty()) continue;
    const int m = static_cast<int>(parts.size());
    const int n = static_cast<int>(words_lower.size());
    for (int start = 0; start + m <= n; ++start) {
      bool match = true;
      for (int k = 0; k < m; ++k) {
        if (words_lower[start + k] != parts[k]) {
          match = false;
          break;
        }
      }
      if (match) {
        const Span span{start, start + m};
        if (seen.insert(span).second) out.push_back(span);
      }
    }
  }
  return out;
}

}  // namespace keyspan

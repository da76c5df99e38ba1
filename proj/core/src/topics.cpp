#include "keyspan/topics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "keyspan/errors.hpp"
#include "keyspan/rng.hpp"

namespace keyspan {

LabelMode label_mode_from_string(const std::string& s) {
  if (s == "multi_label") return LabelMode::multi_label;
  if (s == "single_label") return LabelMode::single_label;
  throw ConfigError("unknown label mode '" + s +
                    "' (expected multi_label or single_label)");
}

const char* label_mode_name(LabelMode m) {
  return m == LabelMode::multi_label ? "multi_label" : "single_label";
}

int TopicSchema::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < topic_ids.size(); ++i) {
    if (topic_ids[i] == id) return static_cast<int>(i);
  }
  return -1;
}

void TopicSchema::validate() const {
  if (topic_ids.size() < 2) {
    throw ValidationError("topic schema needs at least 2 topics, got " +
                          std::to_string(topic_ids.size()));
  }
  std::set<std::string> seen;
  for (const auto& id : topic_ids) {
    if (!seen.insert(id).second) {
      throw ValidationError("duplicate topic id '" + id + "' in schema");
    }
  }
}

std::map<std::string, TopicLabelSet> label_from_gold(
    const std::vector<Document>& corpus, const TopicSchema& schema) {
  schema.validate();
  std::map<std::string, TopicLabelSet> out;
  for (const auto& doc : corpus) {
    if (!doc.topics) {
      throw ValidationError("doc " + doc.doc_id + " has no topics field");
    }
    if (doc.topics->empty()) {
      throw ValidationError("doc " + doc.doc_id + " has an empty topic set");
    }
    for (const auto& t : *doc.topics) {
      if (schema.index_of(t) < 0) {
        throw ValidationError("doc " + doc.doc_id + ": topic '" + t +
                              "' not in schema");
      }
    }
    if (schema.mode == LabelMode::single_label && doc.topics->size() != 1) {
      throw ValidationError("doc " + doc.doc_id + " carries " +
                            std::to_string(doc.topics->size()) +
                            " topics under single_label mode");
    }
    out[doc.doc_id] = *doc.topics;
  }
  return out;
}

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has_alnum(const std::string& s) {
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) return true;
  }
  return false;
}

}  // namespace

TopicModel fit_topic_model(const std::vector<Document>& corpus,
                           const TopicModelOptions& opt) {
  const int D = static_cast<int>(corpus.size());
  if (D == 0) throw ValidationError("cannot fit topics on an empty corpus");
  if (opt.T < 2) throw ConfigError("topic count must be at least 2");
  if (opt.T > D) {
    throw ConfigError("topic count " + std::to_string(opt.T) +
                      " exceeds document count " + std::to_string(D));
  }

  // Vocabulary with a document-frequency floor, in first-seen order.
  std::unordered_map<std::string, int> df;
  std::vector<std::string> seen_order;
  for (const auto& doc : corpus) {
    std::set<std::string> in_doc;
    for (const auto& w : doc.words) {
      if (!has_alnum(w.surface)) continue;
      const std::string lw = lowercase(w.surface);
      if (in_doc.insert(lw).second) {
        if (df.find(lw) == df.end()) seen_order.push_back(lw);
        ++df[lw];
      }
    }
  }
  TopicModel model;
  for (const auto& term : seen_order) {
    if (df[term] >= opt.min_df) model.vocab.push_back(term);
  }
  const int V = static_cast<int>(model.vocab.size());
  if (V == 0) {
    throw ValidationError("vocabulary is empty after document-frequency floor " +
                          std::to_string(opt.min_df));
  }
  std::unordered_map<std::string, int> vocab_index;
  for (int v = 0; v < V; ++v) vocab_index[model.vocab[v]] = v;

  // TF-IDF matrix, D x V.
  std::vector<std::vector<double>> X(D, std::vector<double>(V, 0.0));
  for (int d = 0; d < D; ++d) {
    const auto& doc = corpus[d];
    model.doc_ids.push_back(doc.doc_id);
    if (doc.words.empty()) continue;
    std::unordered_map<int, int> counts;
    for (const auto& w : doc.words) {
      const auto it = vocab_index.find(lowercase(w.surface));
      if (it != vocab_index.end()) ++counts[it->second];
    }
    const double len = static_cast<double>(doc.words.size());
    for (const auto& [v, c] : counts) {
      const double idf = std::log(static_cast<double>(D) / df[model.vocab[v]]);
      X[d][v] = (c / len) * idf;
    }
  }

  const int T = opt.T;
  auto& W = model.loadings;
  auto& H = model.weights;
  W.assign(D, std::vector<double>(T, 0.0));
  H.assign(T, std::vector<double>(V, 0.0));
  Rng rng(Rng::derive(opt.seed, 0xf17));
  for (auto& row : W) {
    for (auto& x : row) x = rng.uniform(0.1, 1.0);
  }
  for (auto& row : H) {
    for (auto& x : row) x = rng.uniform(0.1, 1.0);
  }

  // Multiplicative updates for min ||X - WH||_F; each sweep leaves the
  // residual non-increasing (up to the epsilon guards).
  constexpr double kEps = 1e-12;
  model.residuals.reserve(opt.iterations);
  for (int it = 0; it < opt.iterations; ++it) {
    // H <- H * (WtX) / (WtW H)
    std::vector<std::vector<double>> WtW(T, std::vector<double>(T, 0.0));
    for (int d = 0; d < D; ++d) {
      for (int i = 0; i < T; ++i) {
        for (int j = 0; j < T; ++j) WtW[i][j] += W[d][i] * W[d][j];
      }
    }
    for (int t = 0; t < T; ++t) {
      for (int v = 0; v < V; ++v) {
        double num = 0.0;
        for (int d = 0; d < D; ++d) num += W[d][t] * X[d][v];
        double den = 0.0;
        for (int s = 0; s < T; ++s) den += WtW[t][s] * H[s][v];
        H[t][v] *= num / (den + kEps);
      }
    }
    // W <- W * (XHt) / (W HHt)
    std::vector<std::vector<double>> HHt(T, std::vector<double>(T, 0.0));
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j < T; ++j) {
        double s = 0.0;
        for (int v = 0; v < V; ++v) s += H[i][v] * H[j][v];
        HHt[i][j] = s;
      }
    }
    for (int d = 0; d < D; ++d) {
      for (int t = 0; t < T; ++t) {
        double num = 0.0;
        for (int v = 0; v < V; ++v) num += X[d][v] * H[t][v];
        double den = 0.0;
        for (int s = 0; s < T; ++s) den += W[d][s] * HHt[s][t];
        W[d][t] *= num / (den + kEps);
      }
    }
    double res = 0.0;
    for (int d = 0; d < D; ++d) {
      for (int v = 0; v < V; ++v) {
        double rec = 0.0;
        for (int t = 0; t < T; ++t) rec += W[d][t] * H[t][v];
        const double diff = X[d][v] - rec;
        res += diff * diff;
      }
    }
    model.residuals.push_back(std::sqrt(res));
  }

  // Name each topic by its five heaviest terms; the index prefix keeps ids
  // unique even when top terms collide.
  for (int t = 0; t < T; ++t) {
    std::vector<int> order(V);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return H[t][a] > H[t][b];
    });
    std::string name = (t < 10 ? "t0" : "t") + std::to_string(t);
    // only words the topic actually weights; a sparse topic gets a short name
    for (int k = 0; k < std::min(5, V) && H[t][order[k]] > 0.0; ++k) {
      name += "-" + model.vocab[order[k]];
    }
    model.schema.topic_ids.push_back(name);
  }
  model.schema.mode = opt.mode;
  return model;
}

std::map<std::string, TopicLabelSet> assign_topics(
    const std::vector<std::vector<double>>& loadings,
    const std::vector<std::string>& doc_ids, const TopicSchema& schema,
    double rel_threshold, int* zero_row_warnings) {
  if (loadings.size() != doc_ids.size()) {
    throw ValidationError("loadings rows (" + std::to_string(loadings.size()) +
                          ") do not match doc ids (" +
                          std::to_string(doc_ids.size()) + ")");
  }
  if (zero_row_warnings) *zero_row_warnings = 0;
  std::map<std::string, TopicLabelSet> out;
  for (std::size_t d = 0; d < loadings.size(); ++d) {
    const auto& row = loadings[d];
    if (static_cast<int>(row.size()) != schema.T()) {
      throw ValidationError("loading row for " + doc_ids[d] + " has " +
                            std::to_string(row.size()) + " entries, schema has " +
                            std::to_string(schema.T()));
    }
    int argmax = 0;
    for (int t = 1; t < schema.T(); ++t) {
      if (row[t] > row[argmax]) argmax = t;  // ties keep the lower index
    }
    TopicLabelSet labels;
    if (row[argmax] <= 0.0) {
      if (zero_row_warnings) ++(*zero_row_warnings);
      labels.insert(schema.topic_ids[argmax]);
    } else if (schema.mode == LabelMode::single_label) {
      labels.insert(schema.topic_ids[argmax]);
    } else {
      const double cut = rel_threshold * row[argmax];
      for (int t = 0; t < schema.T(); ++t) {
        if (row[t] >= cut) labels.insert(schema.topic_ids[t]);
      }
    }
    out[doc_ids[d]] = std::move(labels);
  }
  return out;
}

TopicSchema filter_topics(const TopicSchema& schema,
                          const std::vector<std::string>& removal_list) {
  std::set<std::string> remove;
  for (const auto& id : removal_list) {
    if (schema.index_of(id) < 0) {
      throw ConfigError("removal list names unknown topic '" + id + "'");
    }
    remove.insert(id);
  }
  TopicSchema out;
  out.mode = schema.mode;
  for (const auto& id : schema.topic_ids) {
    if (!remove.count(id)) out.topic_ids.push_back(id);
  }
  if (out.topic_ids.size() < 2) {
    throw ConfigError("topic removal leaves " +
                      std::to_string(out.topic_ids.size()) +
                      " topics; at least 2 required");
  }
  return out;
}

std::map<std::string, TopicLabelSet> filter_labels(
    const std::map<std::string, TopicLabelSet>& labels,
    const TopicSchema& filtered, int* dropped_docs) {
  std::set<std::string> keep(filtered.topic_ids.begin(),
                             filtered.topic_ids.end());
  if (dropped_docs) *dropped_docs = 0;
  std::map<std::string, TopicLabelSet> out;
  for (const auto& [doc_id, set] : labels) {
    TopicLabelSet kept;
    for (const auto& t : set) {
      if (keep.count(t)) kept.insert(t);
    }
    if (kept.empty()) {
      if (dropped_docs) ++(*dropped_docs);
    } else {
      out[doc_id] = std::move(kept);
    }
  }
  return out;
}

LoadingsFile load_loadings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open loadings file: " + path);
  LoadingsFile out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("doc_id") || !j["doc_id"].is_string() ||
        !j.contains("loadings") || !j["loadings"].is_array()) {
      throw ParseError(path, lineno, "expected {doc_id, loadings: [...]}");
    }
    const std::string doc_id = j["doc_id"].get<std::string>();
    if (!seen.insert(doc_id).second) {
      throw ParseError(path, lineno, "duplicate doc_id '" + doc_id + "'");
    }
    std::vector<double> row;
    for (const auto& v : j["loadings"]) {
      if (!v.is_number()) {
        throw ParseError(path, lineno, "loadings entries must be numbers");
      }
      row.push_back(v.get<double>());
    }
    if (!out.loadings.empty() && row.size() != out.loadings.front().size()) {
      throw ParseError(path, lineno, "inconsistent loadings width");
    }
    out.doc_ids.push_back(doc_id);
    out.loadings.push_back(std::move(row));
  }
  return out;
}

std::vector<std::string> load_removal_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open removal list: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    std::size_t start = 0;
    while (start < line.size() && line[start] == ' ') ++start;
    if (start > 0) line = line.substr(start);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace keyspan

#include "keyspan/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "keyspan/errors.hpp"

namespace keyspan {

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

double IdfTable::lookup(const std::string& word_lower) const {
  const auto it = idf.find(word_lower);
  if (it != idf.end()) return it->second;
  // Unseen word: treat as occurring in one document.
  return std::log(static_cast<double>(std::max<long>(n_docs, 1)));
}

IdfTable build_idf(const std::vector<Document>& corpus) {
  if (corpus.empty()) {
    throw ValidationError("cannot build idf table from an empty corpus");
  }
  IdfTable table;
  table.n_docs = static_cast<long>(corpus.size());
  std::unordered_map<std::string, long> df;
  for (const auto& doc : corpus) {
    std::set<std::string> in_doc;
    for (const auto& w : doc.words) in_doc.insert(lowercase(w.surface));
    for (const auto& word : in_doc) ++df[word];
  }
  for (const auto& [word, count] : df) {
    table.idf[word] = std::log(static_cast<double>(table.n_docs) / count);
  }
  return table;
}

void save_idf(const IdfTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write idf table: " + path);
  nlohmann::ordered_json j;
  j["n_docs"] = table.n_docs;
  nlohmann::ordered_json words;
  for (const auto& [word, value] : table.idf) words[word] = value;
  j["idf"] = std::move(words);
  out << j.dump(2) << "\n";
  if (!out) throw RuntimeFailure("write failed: " + path);
}

IdfTable load_idf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open idf table: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid idf table " + path + ": " + e.what());
  }
  IdfTable table;
  table.n_docs = j.at("n_docs").get<long>();
  for (const auto& [word, value] : j.at("idf").items()) {
    table.idf[word] = value.get<double>();
  }
  return table;
}

int compute_k(const std::vector<int>& predictions_per_doc, bool* warned) {
  if (warned) *warned = false;
  if (predictions_per_doc.empty()) {
    throw ValidationError("equal-K needs at least one document");
  }
  long total = 0;
  for (int c : predictions_per_doc) {
    if (c < 0) throw ValidationError("negative prediction count");
    total += c;
  }
  if (total == 0) {
    if (warned) *warned = true;
    return 1;
  }
  const double mean =
      static_cast<double>(total) / static_cast<double>(predictions_per_doc.size());
  const int k = static_cast<int>(std::floor(mean + 0.5));  // round half up
  return std::max(1, k);
}

double tfidf_score(const Document& doc, const Span& span, const IdfTable& idf) {
  const int n = static_cast<int>(doc.words.size());
  if (span.first < 0 || span.first >= span.second || span.second > n) {
    throw ValidationError("candidate span [" + std::to_string(span.first) +
                          "," + std::to_string(span.second) +
                          ") outside document " + doc.doc_id);
  }
  // tf over the document's lowercased words.
  std::unordered_map<std::string, int> counts;
  for (const auto& w : doc.words) ++counts[lowercase(w.surface)];
  const double len = static_cast<double>(n);
  double sum = 0.0;
  for (int i = span.first; i < span.second; ++i) {
    const std::string word = lowercase(doc.words[i].surface);
    const double tf = counts[word] / len;
    sum += tf * idf.lookup(word);
  }
  return sum / static_cast<double>(span.second - span.first);
}

std::vector<Span> tfidf_rank(const Document& doc,
                             const std::vector<Span>& candidates,
                             const IdfTable& idf, int k) {
  if (k < 1) throw ConfigError("K must be at least 1");
  // Score once with shared term counts rather than per candidate.
  std::unordered_map<std::string, int> counts;
  for (const auto& w : doc.words) ++counts[lowercase(w.surface)];
  const double len = static_cast<double>(doc.words.size());

  struct Entry {
    double score;
    Span span;
  };
  std::vector<Entry> entries;
  entries.reserve(candidates.size());
  for (const auto& span : candidates) {
    if (span.first < 0 || span.first >= span.second ||
        span.second > static_cast<int>(doc.words.size())) {
      throw ValidationError("candidate span [" + std::to_string(span.first) +
                            "," + std::to_string(span.second) +
                            ") outside document " + doc.doc_id);
    }
    double sum = 0.0;
    for (int i = span.first; i < span.second; ++i) {
      const std::string word = lowercase(doc.words[i].surface);
      const double tf = counts[word] / len;
      sum += tf * idf.lookup(word);
    }
    entries.push_back({sum / (span.second - span.first), span});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.span < b.span;  // earlier start, then earlier end
  });
  std::vector<Span> out;
  const std::size_t take =
      std::min(static_cast<std::size_t>(k), entries.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(entries[i].span);
  return out;
}

}  // namespace keyspan

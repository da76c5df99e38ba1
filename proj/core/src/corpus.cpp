#include "keyspan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"
#include "keyspan/errors.hpp"

namespace keyspan {

namespace {

using nlohmann::ordered_json;

bool is_space_byte(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

// ASCII punctuation only; multibyte UTF-8 sequences stay inside the word.
bool is_punct_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u) != 0;
}

}  // namespace

std::vector<Word> segment_words(const std::string& text) {
  std::vector<Word> words;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space_byte(text[i])) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !is_space_byte(text[j])) ++j;
    // Token [i, j): peel punctuation off both edges into one-byte words.
    std::size_t b = i, e = j;
    while (b < e && is_punct_byte(text[b])) {
      words.push_back({text.substr(b, 1), b, b + 1});
      ++b;
    }
    std::size_t tail = e;
    while (tail > b && is_punct_byte(text[tail - 1])) --tail;
    if (tail > b) words.push_back({text.substr(b, tail - b), b, tail});
    for (std::size_t k = tail; k < e; ++k) {
      words.push_back({text.substr(k, 1), k, k + 1});
    }
    i = j;
  }
  return words;
}

void validate_document(const Document& doc) {
  if (doc.doc_id.empty()) throw ValidationError("document with empty doc_id");
  std::size_t prev_end = 0;
  bool first = true;
  for (const auto& w : doc.words) {
    if (w.char_start >= w.char_end || w.char_end > doc.text.size()) {
      throw ValidationError("doc " + doc.doc_id + ": word offsets [" +
                            std::to_string(w.char_start) + "," +
                            std::to_string(w.char_end) + ") out of range");
    }
    if (!first && w.char_start < prev_end) {
      throw ValidationError("doc " + doc.doc_id +
                            ": word offsets overlap or go backwards at byte " +
                            std::to_string(w.char_start));
    }
    if (doc.text.compare(w.char_start, w.char_end - w.char_start, w.surface) !=
        0) {
      throw ValidationError("doc " + doc.doc_id + ": surface '" + w.surface +
                            "' does not match text at [" +
                            std::to_string(w.char_start) + "," +
                            std::to_string(w.char_end) + ")");
    }
    prev_end = w.char_end;
    first = false;
  }
  const int n = static_cast<int>(doc.words.size());
  std::vector<std::pair<int, int>> spans;
  for (const auto& g : doc.gold_spans) {
    if (g.word_start < 0 || g.word_start >= g.word_end || g.word_end > n) {
      throw ValidationError("doc " + doc.doc_id + ": gold span [" +
                            std::to_string(g.word_start) + "," +
                            std::to_string(g.word_end) + ") out of range");
    }
    spans.emplace_back(g.word_start, g.word_end);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t k = 1; k < spans.size(); ++k) {
    if (spans[k].first < spans[k - 1].second) {
      throw ValidationError("doc " + doc.doc_id + ": overlapping gold spans");
    }
  }
  if (doc.topics && doc.topics->empty()) {
    throw ValidationError("doc " + doc.doc_id + ": empty topics field");
  }
}

std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file: " + path);
  std::vector<Document> docs;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(path, lineno, "line is not an object");
    if (!j.contains("doc_id") || !j["doc_id"].is_string()) {
      throw ParseError(path, lineno, "missing string field 'doc_id'");
    }
    if (!j.contains("text") || !j["text"].is_string()) {
      throw ParseError(path, lineno, "missing string field 'text'");
    }
    Document doc;
    doc.doc_id = j["doc_id"].get<std::string>();
    doc.text = j["text"].get<std::string>();
    if (j.contains("words")) {
      if (!j["words"].is_array()) {
        throw ParseError(path, lineno, "'words' must be an array");
      }
      for (const auto& w : j["words"]) {
        if (!w.is_array() || w.size() != 3 || !w[0].is_string() ||
            !w[1].is_number_unsigned() || !w[2].is_number_unsigned()) {
          throw ParseError(path, lineno,
                           "word entries must be [surface, start, end]");
        }
        doc.words.push_back({w[0].get<std::string>(),
                             w[1].get<std::size_t>(), w[2].get<std::size_t>()});
      }
    } else {
      doc.words = segment_words(doc.text);
    }
    if (j.contains("gold_spans")) {
      if (!j["gold_spans"].is_array()) {
        throw ParseError(path, lineno, "'gold_spans' must be an array");
      }
      for (const auto& g : j["gold_spans"]) {
        if (!g.is_object() || !g.contains("word_start") ||
            !g.contains("word_end")) {
          throw ParseError(path, lineno,
                           "gold span entries need word_start and word_end");
        }
        GoldSpan gs;
        gs.word_start = g["word_start"].get<int>();
        gs.word_end = g["word_end"].get<int>();
        if (g.contains("type") && g["type"].is_string()) {
          gs.type_label = g["type"].get<std::string>();
        }
        doc.gold_spans.push_back(gs);
      }
    }
    if (j.contains("topics")) {
      if (!j["topics"].is_array()) {
        throw ParseError(path, lineno, "'topics' must be an array");
      }
      std::set<std::string> topics;
      for (const auto& t : j["topics"]) {
        if (!t.is_string()) {
          throw ParseError(path, lineno, "topic entries must be strings");
        }
        topics.insert(t.get<std::string>());
      }
      doc.topics = std::move(topics);
    }
    if (!seen_ids.insert(doc.doc_id).second) {
      throw ParseError(path, lineno, "duplicate doc_id '" + doc.doc_id + "'");
    }
    validate_document(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write corpus file: " + path);
  for (const auto& doc : docs) {
    ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["text"] = doc.text;
    ordered_json words = ordered_json::array();
    for (const auto& w : doc.words) {
      words.push_back({w.surface, w.char_start, w.char_end});
    }
    j["words"] = std::move(words);
    if (!doc.gold_spans.empty()) {
      ordered_json spans = ordered_json::array();
      for (const auto& g : doc.gold_spans) {
        ordered_json s;
        s["word_start"] = g.word_start;
        s["word_end"] = g.word_end;
        if (!g.type_label.empty()) s["type"] = g.type_label;
        spans.push_back(std::move(s));
      }
      j["gold_spans"] = std::move(spans);
    }
    if (doc.topics) {
      j["topics"] = std::vector<std::string>(doc.topics->begin(),
                                             doc.topics->end());
    }
    out << j.dump() << "\n";
  }
  if (!out) throw RuntimeFailure("write failed: " + path);
}

std::vector<TextBlock> split_blocks(const Document& doc, int block_size,
                                    int overlap) {
  if (overlap < 0 || block_size <= overlap) {
    throw ConfigError("block_size (" + std::to_string(block_size) +
                      ") must exceed overlap (" + std::to_string(overlap) +
                      ")");
  }
  std::vector<TextBlock> blocks;
  const int n = static_cast<int>(doc.words.size());
  if (n == 0) return blocks;
  const int step = block_size - overlap;
  for (int k = 0;; ++k) {
    const int start = k * step;
    // Every block after the first must contribute at least one word beyond
    // the previous block's end; otherwise the document is already covered.
    if (k > 0 && start + overlap >= n) break;
    const int end = std::min(start + block_size, n);
    TextBlock b;
    b.doc_id = doc.doc_id;
    b.block_index = k;
    b.word_offset = start;
    b.words.assign(doc.words.begin() + start, doc.words.begin() + end);
    b.char_offset = doc.words[start].char_start;
    const std::size_t char_end = doc.words[end - 1].char_end;
    b.text = doc.text.substr(b.char_offset, char_end - b.char_offset);
    blocks.push_back(std::move(b));
    if (end >= n) break;
  }
  return blocks;
}

int to_global(const TextBlock& block, int local_word_index) {
  if (local_word_index < 0 ||
      local_word_index >= static_cast<int>(block.size())) {
    throw ValidationError("local word index " +
                          std::to_string(local_word_index) +
                          " out of range for block of " +
                          std::to_string(block.size()) + " words");
  }
  return block.word_offset + local_word_index;
}

int to_local(const TextBlock& block, int global_word_index) {
  const int local = global_word_index - block.word_offset;
  if (local < 0 || local >= static_cast<int>(block.size())) {
    throw ValidationError("global word index " +
                          std::to_string(global_word_index) +
                          " not covered by block " +
                          std::to_string(block.block_index));
  }
  return local;
}

std::pair<std::size_t, std::size_t> block_char_extent(const TextBlock& block,
                                                      int word_start,
                                                      int word_end) {
  if (word_start < 0 || word_start >= word_end ||
      word_end > static_cast<int>(block.size())) {
    throw ValidationError("word range [" + std::to_string(word_start) + "," +
                          std::to_string(word_end) + ") invalid for block of " +
                          std::to_string(block.size()) + " words");
  }
  return {block.words[word_start].char_start - block.char_offset,
          block.words[word_end - 1].char_end - block.char_offset};
}

}  // namespace keyspan

#include "keyspan/candidates.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "keyspan/errors.hpp"

namespace keyspan {

const char* tag_name(PosTag t) {
  switch (t) {
    case PosTag::DET: return "DET";
    case PosTag::ADJ: return "ADJ";
    case PosTag::NOUN: return "NOUN";
    case PosTag::PROPN: return "PROPN";
    case PosTag::VERB: return "VERB";
    case PosTag::OTHER: return "OTHER";
  }
  return "OTHER";
}

namespace {

const std::unordered_set<std::string> kDeterminers = {
    "the", "a", "an", "this", "that", "these", "those", "each", "every",
    "some", "any", "no", "another", "its", "their", "his", "her", "our",
    "your", "my"};

const std::unordered_set<std::string> kVerbs = {
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have",
    "had", "do", "does", "did", "can", "could", "will", "would", "shall",
    "should", "may", "might", "must", "show", "shows", "showed", "use",
    "uses", "make", "makes", "made", "propose", "proposes", "present",
    "presents", "describe", "describes", "find", "finds", "found"};

const std::unordered_set<std::string> kOther = {
    "of", "in", "on", "at", "by", "for", "with", "to", "from", "into",
    "over", "under", "between", "through", "during", "without", "within",
    "and", "or", "but", "nor", "as", "if", "than", "then", "so", "because",
    "while", "although", "though", "we", "they", "it", "he", "she", "i",
    "you", "one", "not", "also", "only", "very", "more", "most", "less",
    "least", "such", "both", "all", "which", "who", "whom", "whose", "what",
    "when", "where", "how", "why", "there", "here", "however", "thus",
    "therefore", "respectively", "et", "al"};

const std::unordered_set<std::string> kAdjectives = {
    "new", "good", "bad", "high", "low", "large", "small", "novel", "deep",
    "fast", "slow", "quick", "big", "strong", "weak", "simple", "complex",
    "main", "recent", "early", "late", "several", "many", "few", "first",
    "second", "third", "other", "same", "different", "common", "rare",
    "long", "short", "full", "joint", "latent", "robust", "efficient"};

bool has_suffix(const std::string& s, const char* suf) {
  const std::size_t n = std::strlen(suf);
  return s.size() > n && s.compare(s.size() - n, n, suf) == 0;
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool noun_like(PosTag t) { return t == PosTag::NOUN || t == PosTag::PROPN; }

bool np_interior(PosTag t) {
  return t == PosTag::ADJ || t == PosTag::NOUN || t == PosTag::PROPN;
}

}  // namespace

PosTag tag_word(const std::string& surface, bool sentence_initial) {
  if (surface.empty()) return PosTag::OTHER;
  const unsigned char first = static_cast<unsigned char>(surface[0]);
  if (std::ispunct(first) && surface.size() == 1) return PosTag::OTHER;
  if (std::isdigit(first)) return PosTag::OTHER;

  const std::string lower = lowercase(surface);
  if (kDeterminers.count(lower)) return PosTag::DET;
  if (kVerbs.count(lower)) return PosTag::VERB;
  if (kOther.count(lower)) return PosTag::OTHER;
  if (kAdjectives.count(lower)) return PosTag::ADJ;

  if (!sentence_initial && std::isupper(first)) return PosTag::PROPN;

  if (has_suffix(lower, "ly")) return PosTag::OTHER;
  if (has_suffix(lower, "ing") || has_suffix(lower, "ed")) return PosTag::VERB;
  if (has_suffix(lower, "ous") || has_suffix(lower, "ive") ||
      has_suffix(lower, "ic") || has_suffix(lower, "al") ||
      has_suffix(lower, "able") || has_suffix(lower, "ible") ||
      has_suffix(lower, "ful") || has_suffix(lower, "less") ||
      has_suffix(lower, "ish")) {
    return PosTag::ADJ;
  }
  // Unknown content word: noun is the productive default and the safe one
  // for a candidate extractor (misses cost recall, extras are filterable).
  return PosTag::NOUN;
}

PosTaggedBlock tag_block(const TextBlock& block) {
  PosTaggedBlock out;
  out.doc_id = block.doc_id;
  out.block_index = block.block_index;
  out.tags.reserve(block.size());
  bool sentence_initial = true;
  for (const auto& w : block.words) {
    out.tags.push_back(tag_word(w.surface, sentence_initial));
    sentence_initial =
        (w.surface == "." || w.surface == "!" || w.surface == "?");
  }
  return out;
}

namespace {

std::vector<CandidatePhrase> extract_impl(const TextBlock& block,
                                          const PosTaggedBlock& tags,
                                          bool nested) {
  if (tags.tags.size() != block.size()) {
    throw ValidationError("tag list (" + std::to_string(tags.tags.size()) +
                          ") does not align with block of " +
                          std::to_string(block.size()) + " words");
  }
  const int n = static_cast<int>(block.size());
  std::set<std::pair<int, int>> spans;
  int i = 0;
  while (i < n) {
    if (!np_interior(tags.tags[i])) {
      ++i;
      continue;
    }
    int run_end = i;
    while (run_end < n && np_interior(tags.tags[run_end])) ++run_end;
    // Trim to the last nominal word; a run of bare adjectives is no NP.
    int last_noun = -1;
    for (int k = i; k < run_end; ++k) {
      if (noun_like(tags.tags[k])) last_noun = k;
    }
    if (last_noun >= 0) {
      const int end = last_noun + 1;
      int start = i;
      if (start > 0 && tags.tags[start - 1] == PosTag::DET) --start;
      if (nested) {
        for (int k = start; k < end; ++k) spans.emplace(k, end);
      } else {
        spans.emplace(start, end);
      }
    }
    i = run_end;
  }
  std::vector<CandidatePhrase> out;
  out.reserve(spans.size());
  for (const auto& [ws, we] : spans) {
    CandidatePhrase c;
    c.doc_id = block.doc_id;
    c.block_index = block.block_index;
    c.word_start = ws;
    c.word_end = we;
    for (int k = ws; k < we; ++k) {
      if (k > ws) c.surface += ' ';
      c.surface += block.words[k].surface;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

std::vector<CandidatePhrase> extract_candidates(const TextBlock& block,
                                                const PosTaggedBlock& tags) {
  return extract_impl(block, tags, /*nested=*/true);
}

std::vector<CandidatePhrase> extract_candidates_maximal(
    const TextBlock& block, const PosTaggedBlock& tags) {
  return extract_impl(block, tags, /*nested=*/false);
}

CandidatePhrase align_subtokens(
    CandidatePhrase cand, std::pair<std::size_t, std::size_t> char_extent,
    const std::vector<std::pair<std::size_t, std::size_t>>& subtoken_spans) {
  cand.subtoken_indices.clear();
  const auto [cs, ce] = char_extent;
  for (std::size_t i = 0; i < subtoken_spans.size(); ++i) {
    const auto& [ts, te] = subtoken_spans[i];
    if (ts < te && ts < ce && te > cs) {
      cand.subtoken_indices.push_back(static_cast<int>(i));
    }
  }
  cand.unencodable = cand.subtoken_indices.empty();
  return cand;
}

std::map<BlockRef, std::vector<CandidatePhrase>> load_external_candidates(
    const std::string& path, const std::vector<TextBlock>& blocks) {
  std::unordered_map<std::string, const TextBlock*> index;
  for (const auto& b : blocks) {
    index[b.doc_id + "#" + std::to_string(b.block_index)] = &b;
  }
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open candidates file: " + path);

  std::map<BlockRef, std::set<std::pair<int, int>>> spans;
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
    for (const char* field : {"doc_id", "block_index", "word_start", "word_end"}) {
      if (!j.contains(field)) {
        throw ParseError(path, lineno, std::string("missing field '") + field + "'");
      }
    }
    const std::string doc_id = j["doc_id"].get<std::string>();
    const int bi = j["block_index"].get<int>();
    const int ws = j["word_start"].get<int>();
    const int we = j["word_end"].get<int>();
    const auto it = index.find(doc_id + "#" + std::to_string(bi));
    if (it == index.end()) {
      throw ParseError(path, lineno,
                       "unknown block " + doc_id + "#" + std::to_string(bi));
    }
    if (ws < 0 || ws >= we || we > static_cast<int>(it->second->size())) {
      throw ParseError(path, lineno,
                       "span [" + std::to_string(ws) + "," +
                           std::to_string(we) + ") outside block of " +
                           std::to_string(it->second->size()) + " words");
    }
    spans[{doc_id, bi}].emplace(ws, we);
  }

  std::map<BlockRef, std::vector<CandidatePhrase>> out;
  for (const auto& [ref, span_set] : spans) {
    const TextBlock* block = index.at(ref.first + "#" + std::to_string(ref.second));
    for (const auto& [ws, we] : span_set) {
      CandidatePhrase c;
      c.doc_id = ref.first;
      c.block_index = ref.second;
      c.word_start = ws;
      c.word_end = we;
      for (int k = ws; k < we; ++k) {
        if (k > ws) c.surface += ' ';
        c.surface += block->words[k].surface;
      }
      out[ref].push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace keyspan

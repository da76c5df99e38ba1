#include "keyspan/subword.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "keyspan/errors.hpp"

namespace keyspan {

namespace {

// Specials occupy the first ids; the observed byte alphabet follows, then
// one piece per learned merge.
constexpr int kNumSpecials = 2;

}  // namespace

BpeTokenizer BpeTokenizer::train(const std::vector<Document>& corpus,
                                 int max_merges) {
  if (max_merges < 0) throw ConfigError("merge budget must be non-negative");

  // Distinct words with frequencies, in deterministic order.
  std::map<std::string, long> word_freq;
  for (const auto& doc : corpus) {
    for (const auto& w : doc.words) ++word_freq[w.surface];
  }
  if (word_freq.empty()) {
    throw ValidationError("tokenizer training corpus contains no words");
  }

  BpeTokenizer tok;
  tok.id_to_piece_ = {"<cls>", "<unk>"};
  std::set<unsigned char> alphabet;
  for (const auto& [word, freq] : word_freq) {
    (void)freq;
    for (char c : word) alphabet.insert(static_cast<unsigned char>(c));
  }
  for (unsigned char c : alphabet) {
    tok.id_to_piece_.push_back(std::string(1, static_cast<char>(c)));
  }
  for (std::size_t i = 0; i < tok.id_to_piece_.size(); ++i) {
    tok.piece_to_id_[tok.id_to_piece_[i]] = static_cast<int>(i);
  }

  // Each distinct word as a sequence of piece ids, starting from bytes.
  std::vector<std::vector<int>> seqs;
  std::vector<long> freqs;
  for (const auto& [word, freq] : word_freq) {
    std::vector<int> seq;
    seq.reserve(word.size());
    for (char c : word) {
      seq.push_back(tok.piece_to_id_.at(std::string(1, c)));
    }
    seqs.push_back(std::move(seq));
    freqs.push_back(freq);
  }

  for (int rank = 0; rank < max_merges; ++rank) {
    std::map<std::pair<int, int>, long> counts;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      const auto& seq = seqs[s];
      for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        counts[{seq[i], seq[i + 1]}] += freqs[s];
      }
    }
    std::pair<int, int> best{-1, -1};
    long best_count = 1;  // never merge a pair seen once
    for (const auto& [pair, count] : counts) {
      if (count > best_count) {
        best = pair;
        best_count = count;
      } else if (count == best_count && best.first >= 0) {
        // Deterministic tie-break on the piece strings.
        const auto cur = std::make_pair(tok.id_to_piece_[pair.first],
                                        tok.id_to_piece_[pair.second]);
        const auto win = std::make_pair(tok.id_to_piece_[best.first],
                                        tok.id_to_piece_[best.second]);
        if (cur < win) best = pair;
      }
    }
    if (best.first < 0) break;

    const std::string merged =
        tok.id_to_piece_[best.first] + tok.id_to_piece_[best.second];
    int new_id;
    const auto existing = tok.piece_to_id_.find(merged);
    if (existing != tok.piece_to_id_.end() &&
        existing->second >= kNumSpecials) {
      // Two merge paths can spell the same piece; share one id.
      new_id = existing->second;
    } else {
      new_id = static_cast<int>(tok.id_to_piece_.size());
      tok.id_to_piece_.push_back(merged);
      if (existing == tok.piece_to_id_.end()) tok.piece_to_id_[merged] = new_id;
    }
    tok.merges_.push_back(best);
    tok.merge_rank_[best] = rank;
    tok.merge_result_[best] = new_id;

    for (auto& seq : seqs) {
      std::vector<int> out;
      out.reserve(seq.size());
      std::size_t i = 0;
      while (i < seq.size()) {
        if (i + 1 < seq.size() && seq[i] == best.first &&
            seq[i + 1] == best.second) {
          out.push_back(new_id);
          i += 2;
        } else {
          out.push_back(seq[i]);
          ++i;
        }
      }
      seq = std::move(out);
    }
  }
  return tok;
}

std::vector<int> BpeTokenizer::encode_word(const std::string& surface) const {
  std::vector<int> seq;
  seq.reserve(surface.size());
  for (char c : surface) {
    const auto it = piece_to_id_.find(std::string(1, c));
    seq.push_back(it == piece_to_id_.end() ? kUnk : it->second);
  }
  // Apply merges lowest rank first, the canonical BPE greedy order.
  while (seq.size() > 1) {
    int best_rank = std::numeric_limits<int>::max();
    std::pair<int, int> best{-1, -1};
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const auto it = merge_rank_.find({seq[i], seq[i + 1]});
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = it->first;
      }
    }
    if (best.first < 0) break;
    const int new_id = merge_result_.at(best);
    std::vector<int> out;
    out.reserve(seq.size());
    std::size_t i = 0;
    while (i < seq.size()) {
      if (i + 1 < seq.size() && seq[i] == best.first &&
          seq[i + 1] == best.second) {
        out.push_back(new_id);
        i += 2;
      } else {
        out.push_back(seq[i]);
        ++i;
      }
    }
    seq = std::move(out);
  }
  return seq;
}

BpeTokenizer::Encoded BpeTokenizer::encode(const std::vector<Word>& words,
                                           std::size_t char_offset) const {
  Encoded enc;
  for (const auto& w : words) {
    const std::vector<int> ids = encode_word(w.surface);
    std::size_t pos = w.char_start - char_offset;
    for (int id : ids) {
      // <unk> stands for exactly one unrecognized byte; every other piece
      // covers its own length.
      const std::size_t len = (id == kUnk) ? 1 : id_to_piece_[id].size();
      enc.ids.push_back(id);
      enc.spans.emplace_back(pos, pos + len);
      pos += len;
    }
  }
  return enc;
}

std::string BpeTokenizer::to_json() const {
  nlohmann::ordered_json j;
  j["pieces"] = id_to_piece_;
  nlohmann::ordered_json merges = nlohmann::ordered_json::array();
  for (const auto& m : merges_) {
    merges.push_back({m.first, m.second, merge_result_.at(m)});
  }
  j["merges"] = std::move(merges);
  return j.dump();
}

BpeTokenizer BpeTokenizer::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid tokenizer JSON: ") + e.what());
  }
  BpeTokenizer tok;
  if (!j.contains("pieces") || !j.contains("merges")) {
    throw ValidationError("tokenizer JSON needs 'pieces' and 'merges'");
  }
  tok.id_to_piece_ = j["pieces"].get<std::vector<std::string>>();
  if (tok.id_to_piece_.size() < kNumSpecials ||
      tok.id_to_piece_[kCls] != "<cls>" || tok.id_to_piece_[kUnk] != "<unk>") {
    throw ValidationError("tokenizer JSON has malformed specials");
  }
  for (std::size_t i = 0; i < tok.id_to_piece_.size(); ++i) {
    tok.piece_to_id_[tok.id_to_piece_[i]] = static_cast<int>(i);
  }
  int rank = 0;
  for (const auto& m : j["merges"]) {
    if (!m.is_array() || m.size() != 3) {
      throw ValidationError("tokenizer JSON has a malformed merge entry");
    }
    const int a = m[0].get<int>();
    const int b = m[1].get<int>();
    const int result = m[2].get<int>();
    const int n = static_cast<int>(tok.id_to_piece_.size());
    if (a < 0 || a >= n || b < 0 || b >= n || result < kNumSpecials ||
        result >= n) {
      throw ValidationError("tokenizer JSON merge references unknown piece");
    }
    if (tok.id_to_piece_[result] !=
        tok.id_to_piece_[a] + tok.id_to_piece_[b]) {
      throw ValidationError("tokenizer JSON merge result does not spell the "
                            "concatenated pair");
    }
    tok.merges_.emplace_back(a, b);
    tok.merge_rank_[{a, b}] = rank++;
    tok.merge_result_[{a, b}] = result;
  }
  return tok;
}

}  // namespace keyspan

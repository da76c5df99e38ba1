#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "keyspan/corpus.hpp"

namespace keyspan {

// Byte-pair tokenizer trained on the corpus. Initial symbols are the bytes
// observed in training words; merges are learned by pair frequency with
// deterministic tie-breaking. Unseen bytes at encode time map to <unk>.
class BpeTokenizer {
 public:
  static constexpr int kCls = 0;
  static constexpr int kUnk = 1;

  struct Encoded {
    std::vector<int> ids;  // body tokens only, no <cls>
    // Byte span of each token, relative to the encoded text.
    std::vector<std::pair<std::size_t, std::size_t>> spans;
  };

  static BpeTokenizer train(const std::vector<Document>& corpus,
                            int max_merges = 8000);

  // Tokenizes word by word; inter-word bytes belong to no token.
  Encoded encode(const std::vector<Word>& words,
                 std::size_t char_offset = 0) const;

  int vocab_size() const { return static_cast<int>(id_to_piece_.size()); }
  const std::string& piece(int id) const { return id_to_piece_[id]; }
  int merge_count() const { return static_cast<int>(merges_.size()); }

  // Round-trips through JSON for checkpoint embedding.
  std::string to_json() const;
  static BpeTokenizer from_json(const std::string& json_text);

 private:
  std::vector<int> encode_word(const std::string& surface) const;

  std::vector<std::string> id_to_piece_;          // index = token id
  std::map<std::string, int> piece_to_id_;
  std::vector<std::pair<int, int>> merges_;       // in rank order
  std::map<std::pair<int, int>, int> merge_rank_;
  std::map<std::pair<int, int>, int> merge_result_;
};

}  // namespace keyspan

#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace keyspan {

// One word of a document, with byte offsets into the document text.
struct Word {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
};

// Gold keyphrase occurrence, word-indexed with exclusive end.
struct GoldSpan {
  int word_start = 0;
  int word_end = 0;
  std::string type_label;  // empty when the corpus is untyped
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<Word> words;
  std::vector<GoldSpan> gold_spans;
  std::optional<std::set<std::string>> topics;
};

// A window of consecutive document words. Word offsets in `words` stay
// document-global; `text` is the byte slice [char_offset, char_offset+len)
// of the document covering exactly those words.
struct TextBlock {
  std::string doc_id;
  int block_index = 0;
  int word_offset = 0;  // global index of the first word
  std::vector<Word> words;
  std::string text;
  std::size_t char_offset = 0;

  std::size_t size() const { return words.size(); }
};

// Whitespace segmentation with leading/trailing punctuation detached into
// separate words. Offsets are byte positions into `text`.
std::vector<Word> segment_words(const std::string& text);

// JSONL, one document per line. Lines missing required fields raise a
// ParseError naming the line; invalid gold spans raise a ValidationError
// naming the doc_id. Documents without a `words` array get segment_words
// applied to their text.
std::vector<Document> load_corpus(const std::string& path);
void save_corpus(const std::vector<Document>& docs, const std::string& path);

void validate_document(const Document& doc);

// Overlapping windows: starts at 0, step, 2*step, ... with
// step = block_size - overlap. A trailing window adding only words already
// covered is not emitted, so a document of <= block_size words yields
// exactly one block.
std::vector<TextBlock> split_blocks(const Document& doc, int block_size = 512,
                                    int overlap = 128);

// Block-local word index <-> document-global word index.
int to_global(const TextBlock& block, int local_word_index);
int to_local(const TextBlock& block, int global_word_index);

// Byte extent of the word range [word_start, word_end) relative to the
// start of the block text.
std::pair<std::size_t, std::size_t> block_char_extent(const TextBlock& block,
                                                      int word_start,
                                                      int word_end);

}  // namespace keyspan

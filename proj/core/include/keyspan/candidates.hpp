#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "keyspan/corpus.hpp"

namespace keyspan {

// Coarse tag set; just enough to drive the noun-phrase pattern.
enum class PosTag { DET, ADJ, NOUN, PROPN, VERB, OTHER };

const char* tag_name(PosTag t);

struct PosTaggedBlock {
  std::string doc_id;
  int block_index = 0;
  std::vector<PosTag> tags;  // one per block word
};

struct CandidatePhrase {
  std::string doc_id;
  int block_index = 0;
  int word_start = 0;  // block-local
  int word_end = 0;    // exclusive
  std::string surface;
  std::vector<int> subtoken_indices;  // filled by align_subtokens
  bool unencodable = false;           // span fell in a truncated tail
};

// Rule-based tagger: closed-class word lists plus suffix heuristics,
// unknown words default to NOUN. Capitalized non-initial words become
// PROPN. Deterministic and dependency-free; callers with a real tagger
// can bypass it via load_external_candidates.
PosTag tag_word(const std::string& surface, bool sentence_initial);
PosTaggedBlock tag_block(const TextBlock& block);

// All spans matching (DET)? (ADJ|NOUN|PROPN)+ ending in NOUN or PROPN:
// each maximal match plus every suffix of it, so nested head NPs are
// candidates too. Deduplicated by span, ordered by (word_start, word_end).
std::vector<CandidatePhrase> extract_candidates(const TextBlock& block,
                                                const PosTaggedBlock& tags);

// As above but restricted to the maximal matches (no nested suffixes).
std::vector<CandidatePhrase> extract_candidates_maximal(
    const TextBlock& block, const PosTaggedBlock& tags);

// Subtokens whose byte span overlaps [char_start, char_end); indices refer
// to positions in `subtoken_spans`. Empty result means the candidate lies
// entirely beyond subtoken coverage (truncated tail) and the phrase comes
// back flagged unencodable.
CandidatePhrase align_subtokens(
    CandidatePhrase cand, std::pair<std::size_t, std::size_t> char_extent,
    const std::vector<std::pair<std::size_t, std::size_t>>& subtoken_spans);

using BlockRef = std::pair<std::string, int>;  // (doc_id, block_index)

// JSONL of {doc_id, block_index, word_start, word_end}; validated against
// the given blocks and deduplicated. Replaces the built-in chunker output
// for the listed blocks.
std::map<BlockRef, std::vector<CandidatePhrase>> load_external_candidates(
    const std::string& path, const std::vector<TextBlock>& blocks);

}  // namespace keyspan

#pragma once

#include <cstdint>
#include <string>

#include "keyspan/metrics.hpp"
#include "keyspan/model.hpp"
#include "keyspan/topics.hpp"

namespace keyspan {

// One config drives every command; the CLI can override single fields.
// A frozen copy of the resolved config lands in the output directory so
// a run can always be reproduced from its artifacts.
struct RunConfig {
  // Paths. Empty string = not provided.
  std::string corpus_path;
  std::string candidates_path;   // optional external candidates
  std::string schema_path;
  std::string labels_path;
  std::string removal_list_path;
  std::string checkpoint_path;
  std::string predictions_path;
  std::string idf_corpus_path;   // external idf corpus (defaults to corpus)
  std::string output_dir = "out";

  // Corpus windowing.
  int block_size = 512;
  int overlap = 128;

  // Model (see TrainConfig for semantics).
  TrainConfig train;

  // Topic labeling.
  int topic_T = 8;
  LabelMode topic_mode = LabelMode::multi_label;
  double rel_threshold = 0.25;
  int topic_iterations = 200;
  int topic_min_df = 2;

  // Evaluation.
  PartialMatchVariant partial_variant = PartialMatchVariant::any_overlap;
  bool per_type = false;

  std::uint64_t seed = 0;

  void validate() const;
};

RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);  // pretty, stable order
void write_config_echo(const RunConfig& cfg, const std::string& output_dir);

// Single-field override by dotted key, e.g. "train.lr" or "block_size".
// Unknown keys raise ConfigError naming the key.
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

}  // namespace keyspan

#pragma once

#include <map>
#include <string>
#include <vector>

#include "keyspan/config.hpp"
#include "keyspan/extraction.hpp"
#include "keyspan/metrics.hpp"

namespace keyspan {

// Command implementations shared by the CLI and the end-to-end tests.
// Each reads its inputs per the config, writes its artifacts under
// cfg.output_dir, echoes the resolved config there, and returns a short
// human-readable summary for stdout.

std::string cmd_prepare(const RunConfig& cfg);
std::string cmd_label(const RunConfig& cfg);
std::string cmd_train(const RunConfig& cfg);
std::string cmd_extract(const RunConfig& cfg);
std::string cmd_baseline(const RunConfig& cfg);
std::string cmd_evaluate(const RunConfig& cfg);
std::string cmd_synth(const RunConfig& cfg, const std::string& spec_json);

// Helpers the commands and tests share.

std::map<std::string, TopicLabelSet> load_labels(const std::string& path);
void save_labels(const std::map<std::string, TopicLabelSet>& labels,
                 const std::string& path);

TopicSchema load_schema(const std::string& path);
void save_schema(const TopicSchema& schema, const std::string& path);

// Predictions grouped per document as plain spans, for evaluation.
SpanSets predictions_to_spans(const std::vector<KeyphrasePrediction>& preds);
SpanSets gold_to_spans(const std::vector<Document>& docs);

}  // namespace keyspan

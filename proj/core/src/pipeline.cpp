#include "keyspan/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "keyspan/baselines.hpp"
#include "keyspan/candidates.hpp"
#include "keyspan/corpus.hpp"
#include "keyspan/errors.hpp"
#include "keyspan/model.hpp"
#include "keyspan/synth.hpp"
#include "keyspan/topics.hpp"

namespace keyspan {

namespace {

using json = nlohmann::ordered_json;

std::string path_or(const std::string& explicit_path,
                    const std::string& fallback) {
  return explicit_path.empty() ? fallback : explicit_path;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty())
    throw ConfigError(std::string("no ") + what + " path configured");
  if (!std::filesystem::exists(path))
    throw ValidationError(std::string("missing ") + what + " file: " + path);
}

std::vector<Document> read_corpus(const RunConfig& cfg) {
  require_file(cfg.corpus_path, "corpus");
  std::vector<Document> docs = load_corpus(cfg.corpus_path);
  if (docs.empty())
    throw ValidationError("corpus is empty: " + cfg.corpus_path);
  return docs;
}

std::vector<CandidatePhrase> chunk_block(const TextBlock& block, bool nested) {
  PosTaggedBlock tags = tag_block(block);
  return nested ? extract_candidates(block, tags)
                : extract_candidates_maximal(block, tags);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write output file: " + path);
  return out;
}

// report file name derived from the predictions file so model and
// baseline evaluations in one output directory do not clobber each other
std::string report_path_for(const std::string& predictions_path,
                            const std::string& output_dir) {
  std::string stem = std::filesystem::path(predictions_path).stem().string();
  if (stem.empty()) stem = "predictions";
  return output_dir + "/" + stem + "_report.json";
}

std::string join_words(const Document& doc, int ws, int we) {
  std::string s;
  for (int i = ws; i < we; ++i) {
    if (i > ws) s += ' ';
    s += doc.words[static_cast<std::size_t>(i)].surface;
  }
  return s;
}

json prf_to_json(const PRF& prf) {
  json j;
  j["precision"] = prf.p;
  j["recall"] = prf.r;
  j["f1"] = prf.f1;
  return j;
}

}  // namespace

std::string cmd_prepare(const RunConfig& cfg) {
  cfg.validate();
  write_config_echo(cfg, cfg.output_dir);
  std::vector<Document> docs = read_corpus(cfg);

  const std::string blocks_path = cfg.output_dir + "/blocks.jsonl";
  const std::string cands_path = cfg.output_dir + "/candidates.jsonl";
  std::ofstream blocks_out = open_output(blocks_path);
  std::ofstream cands_out = open_output(cands_path);

  long total_words = 0, total_blocks = 0, total_cands = 0;
  for (const Document& doc : docs) {
    validate_document(doc);
    total_words += static_cast<long>(doc.words.size());
    for (const TextBlock& block :
         split_blocks(doc, cfg.block_size, cfg.overlap)) {
      ++total_blocks;
      json b;
      b["doc_id"] = block.doc_id;
      b["block_index"] = block.block_index;
      b["word_offset"] = block.word_offset;
      b["char_offset"] = block.char_offset;
      b["text"] = block.text;
      json words = json::array();
      for (const Word& w : block.words)
        words.push_back(json::array({w.surface, w.char_start, w.char_end}));
      b["words"] = words;
      blocks_out << b.dump() << "\n";

      for (const CandidatePhrase& c :
           chunk_block(block, cfg.train.nested_candidates)) {
        ++total_cands;
        json cj;
        cj["doc_id"] = c.doc_id;
        cj["block_index"] = c.block_index;
        cj["word_start"] = c.word_start;
        cj["word_end"] = c.word_end;
        cj["surface"] = c.surface;
        cands_out << cj.dump() << "\n";
      }
    }
  }

  const double n = static_cast<double>(docs.size());
  std::ostringstream s;
  s << std::fixed << std::setprecision(1);
  s << "prepare: " << docs.size() << " docs, " << total_blocks << " blocks, "
    << total_words / n << " mean words/doc, " << total_cands / n
    << " mean candidates/doc\n";
  s << "blocks: " << blocks_path << "\ncandidates: " << cands_path << "\n";
  return s.str();
}

std::string cmd_label(const RunConfig& cfg) {
  cfg.validate();
  write_config_echo(cfg, cfg.output_dir);
  std::vector<Document> docs = read_corpus(cfg);

  const bool all_gold =
      std::all_of(docs.begin(), docs.end(), [](const Document& d) {
        return d.topics.has_value() && !d.topics->empty();
      });

  TopicSchema schema;
  std::map<std::string, TopicLabelSet> labels;
  int zero_rows = 0;
  std::string source;
  if (all_gold) {
    source = "gold topics";
    std::set<std::string> ids;
    for (const Document& d : docs) ids.insert(d.topics->begin(), d.topics->end());
    schema.topic_ids.assign(ids.begin(), ids.end());
    schema.mode = cfg.topic_mode;
    schema.validate();
    labels = label_from_gold(docs, schema);
  } else {
    source = "topic model";
    TopicModelOptions opt;
    opt.T = cfg.topic_T;
    opt.seed = cfg.seed;
    opt.iterations = cfg.topic_iterations;
    opt.min_df = cfg.topic_min_df;
    opt.mode = cfg.topic_mode;
    TopicModel model = fit_topic_model(docs, opt);
    schema = model.schema;
    labels = assign_topics(model.loadings, model.doc_ids, schema,
                           cfg.rel_threshold, &zero_rows);
  }

  int dropped = 0;
  if (!cfg.removal_list_path.empty()) {
    require_file(cfg.removal_list_path, "removal list");
    std::vector<std::string> removal = load_removal_list(cfg.removal_list_path);
    schema = filter_topics(schema, removal);
    labels = filter_labels(labels, schema, &dropped);
  }

  const std::string schema_path =
      path_or(cfg.schema_path, cfg.output_dir + "/schema.json");
  const std::string labels_path =
      path_or(cfg.labels_path, cfg.output_dir + "/labels.jsonl");
  save_schema(schema, schema_path);
  save_labels(labels, labels_path);

  std::ostringstream s;
  s << "label: " << labels.size() << " docs labeled from " << source << ", "
    << schema.T() << " topics (" << label_mode_name(schema.mode) << ")";
  if (zero_rows > 0) s << ", " << zero_rows << " zero-loading docs";
  if (dropped > 0) s << ", " << dropped << " docs dropped by removal list";
  s << "\nschema: " << schema_path << "\nlabels: " << labels_path << "\n";
  return s.str();
}

std::string cmd_train(const RunConfig& cfg) {
  cfg.validate();
  write_config_echo(cfg, cfg.output_dir);
  std::vector<Document> docs = read_corpus(cfg);

  const std::string schema_path =
      path_or(cfg.schema_path, cfg.output_dir + "/schema.json");
  const std::string labels_path =
      path_or(cfg.labels_path, cfg.output_dir + "/labels.jsonl");
  require_file(schema_path, "schema");
  require_file(labels_path, "labels");
  TopicSchema schema = load_schema(schema_path);
  std::map<std::string, TopicLabelSet> labels = load_labels(labels_path);

  // the top-level windowing settings are authoritative for the whole run
  TrainConfig tc = cfg.train;
  tc.block_size = cfg.block_size;
  tc.overlap = cfg.overlap;

  TrainResult result = train_model(docs, labels, schema, tc);

  const std::string checkpoint_path =
      path_or(cfg.checkpoint_path, cfg.output_dir + "/checkpoint.bin");
  save_checkpoint(result.model, checkpoint_path);

  const std::string log_path = cfg.output_dir + "/train_log.jsonl";
  std::ofstream log_out = open_output(log_path);
  double best_f1 = 0.0;
  for (const TrainLogEntry& e : result.log) {
    if (e.selected) best_f1 = e.dev_weighted_f1;
    json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.L;
    j["loss_label"] = e.L_y;
    j["loss_explanation"] = e.L_e;
    j["dev_weighted_f1"] = e.dev_weighted_f1;
    j["selected"] = e.selected;
    log_out << j.dump() << "\n";
  }

  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << "train: " << result.log.size() << " epochs, best dev weighted F1 "
    << best_f1 << "\ncheckpoint: " << checkpoint_path
    << "\ntrain log: " << log_path << "\n";
  return s.str();
}

std::string cmd_extract(const RunConfig& cfg) {
  cfg.validate();
  write_config_echo(cfg, cfg.output_dir);

  const std::string checkpoint_path =
      path_or(cfg.checkpoint_path, cfg.output_dir + "/checkpoint.bin");
  require_file(checkpoint_path, "checkpoint");
  Model model = load_checkpoint(checkpoint_path);
  std::vector<Document> docs = read_corpus(cfg);

  ExtractOptions opt;
  opt.nested_candidates = cfg.train.nested_candidates;
  std::map<BlockRef, std::vector<CandidatePhrase>> external;
  if (!cfg.candidates_path.empty()) {
    require_file(cfg.candidates_path, "candidates");
    std::vector<TextBlock> all_blocks;
    for (const Document& doc : docs) {
      std::vector<TextBlock> blocks =
          split_blocks(doc, model.cfg.block_size, model.cfg.overlap);
      all_blocks.insert(all_blocks.end(), blocks.begin(), blocks.end());
    }
    external = load_external_candidates(cfg.candidates_path, all_blocks);
    opt.external = &external;
  }

  std::vector<KeyphrasePrediction> preds;
  for (const Document& doc : docs) {
    std::vector<KeyphrasePrediction> doc_preds = extract(model, doc, opt);
    preds.insert(preds.end(), doc_preds.begin(), doc_preds.end());
  }

  const std::string predictions_path =
      path_or(cfg.predictions_path, cfg.output_dir + "/predictions.jsonl");
  save_predictions(preds, predictions_path);

  std::ostringstream s;
  s << std::fixed << std::setprecision(1);
  s << "extract: " << preds.size() << " keyphrases over " << docs.size()
    << " docs (" << static_cast<double>(preds.size()) / docs.size()
    << " mean/doc)\npredictions: " << predictions_path << "\n";
  return s.str();
}

std::string cmd_baseline(const RunConfig& cfg) {
  cfg.validate();
  write_config_echo(cfg, cfg.output_dir);
  std::vector<Document> docs = read_corpus(cfg);

  IdfTable idf;
  if (!cfg.idf_corpus_path.empty()) {
    require_file(cfg.idf_corpus_path, "idf corpus");
    idf = build_idf(load_corpus(cfg.idf_corpus_path));
  } else {
    idf = build_idf(docs);
  }
  save_idf(idf, cfg.output_dir + "/idf.json");

  const std::string predictions_path =
      path_or(cfg.predictions_path, cfg.output_dir + "/predictions.jsonl");
  require_file(predictions_path, "model predictions");
  std::map<std::string, int> pred_counts;
  for (const KeyphrasePrediction& p : load_predictions(predictions_path))
    ++pred_counts[p.doc_id];
  std::vector<int> counts;
  counts.reserve(docs.size());
  for (const Document& doc : docs) {
    auto it = pred_counts.find(doc.doc_id);
    counts.push_back(it == pred_counts.end() ? 0 : it->second);
  }
  bool warned = false;
  const int k = compute_k(counts, &warned);

  std::vector<KeyphrasePrediction> baseline_preds;
  for (const Document& doc : docs) {
    std::set<Span> spans;
    for (const TextBlock& block :
         split_blocks(doc, cfg.block_size, cfg.overlap)) {
      for (const CandidatePhrase& c :
           chunk_block(block, cfg.train.nested_candidates))
        spans.insert({to_global(block, c.word_start),
                      to_global(block, c.word_end - 1) + 1});
    }
    std::vector<Span> candidates(spans.begin(), spans.end());
    for (const Span& span : tfidf_rank(doc, candidates, idf, k)) {
      KeyphrasePrediction p;
      p.doc_id = doc.doc_id;
      p.word_start = span.first;
      p.word_end = span.second;
      p.surface = join_words(doc, span.first, span.second);
      p.best_relevance = tfidf_score(doc, span, idf);
      baseline_preds.push_back(std::move(p));
    }
  }

  const std::string out_path = cfg.output_dir + "/baseline_predictions.jsonl";
  save_predictions(baseline_preds, out_path);

  std::ostringstream s;
  s << "baseline: K=" << k;
  if (warned) s << " (no model predictions, K floored to 1)";
  s << ", " << baseline_preds.size() << " spans over " << docs.size()
    << " docs\nbaseline predictions: " << out_path << "\n";
  return s.str();
}

std::string cmd_evaluate(const RunConfig& cfg) {
  cfg.validate();
  write_config_echo(cfg, cfg.output_dir);
  std::vector<Document> docs = read_corpus(cfg);

  const std::string predictions_path =
      path_or(cfg.predictions_path, cfg.output_dir + "/predictions.jsonl");
  require_file(predictions_path, "predictions");
  std::vector<KeyphrasePrediction> preds = load_predictions(predictions_path);

  SpanSets pred_spans = predictions_to_spans(preds);
  SpanSets gold_spans = gold_to_spans(docs);
  std::optional<TypedSpanSets> typed;
  if (cfg.per_type) {
    TypedSpanSets t;
    for (const Document& doc : docs) t[doc.doc_id] = doc.gold_spans;
    typed = std::move(t);
  }

  SpanMatchReport report =
      span_report(pred_spans, gold_spans, typed, cfg.partial_variant);

  json j;
  j["predictions"] = predictions_path;
  j["partial_variant"] = partial_variant_name(cfg.partial_variant);
  j["exact"] = prf_to_json(report.exact);
  j["partial"] = prf_to_json(report.partial);
  j["avg_f1"] = report.avg_f1;
  j["n_pred"] = report.n_pred;
  j["n_gold"] = report.n_gold;
  j["docs_skipped_no_gold"] = report.docs_skipped_no_gold;
  if (cfg.per_type) {
    json types = json::object();
    for (const auto& [type, recalls] : report.per_type_recall) {
      json t;
      t["exact_recall"] = recalls.first;
      t["partial_recall"] = recalls.second;
      types[type] = t;
    }
    j["per_type_recall"] = types;
  }
  const std::string report_path =
      report_path_for(predictions_path, cfg.output_dir);
  std::ofstream out = open_output(report_path);
  out << j.dump(2) << "\n";

  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << "evaluate: exact F1 " << report.exact.f1 << ", partial F1 "
    << report.partial.f1 << ", avg F1 " << report.avg_f1 << " (n_pred "
    << report.n_pred << ", n_gold " << report.n_gold << ")\nreport: "
    << report_path << "\n";
  return s.str();
}

std::string cmd_synth(const RunConfig& cfg, const std::string& spec_json) {
  cfg.validate();
  write_config_echo(cfg, cfg.output_dir);

  SynthSpec spec;
  spec.seed = cfg.seed;
  if (!spec_json.empty()) {
    json root;
    try {
      root = json::parse(spec_json);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("synth spec is not valid JSON: ") +
                        e.what());
    }
    if (!root.is_object())
      throw ConfigError("synth spec must be a JSON object");
    auto range_field = [](const json& v,
                          const char* key) -> std::pair<int, int> {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
          !v[1].is_number_integer())
        throw ConfigError(std::string("synth spec field '") + key +
                          "' expects [lo, hi]");
      return {v[0].get<int>(), v[1].get<int>()};
    };
    for (const auto& [key, value] : root.items()) {
      if (key == "n_docs") spec.n_docs = value.get<int>();
      else if (key == "n_topics") spec.n_topics = value.get<int>();
      else if (key == "phrases_per_topic") spec.phrases_per_topic = value.get<int>();
      else if (key == "doc_length") spec.doc_length = value.get<int>();
      else if (key == "topics_per_doc") spec.topics_per_doc = range_field(value, "topics_per_doc");
      else if (key == "background_vocab") spec.background_vocab = value.get<int>();
      else if (key == "insertions_per_topic_per_doc")
        spec.insertions_per_topic_per_doc = range_field(value, "insertions_per_topic_per_doc");
      else if (key == "noise_words_per_doc") spec.noise_words_per_doc = value.get<int>();
      else if (key == "noise_repeats") spec.noise_repeats = range_field(value, "noise_repeats");
      else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown synth spec key '" + key + "'");
    }
  }

  SynthCorpus corpus = generate(spec);

  const std::string corpus_path =
      path_or(cfg.corpus_path, cfg.output_dir + "/synth_corpus.jsonl");
  save_corpus(corpus.docs, corpus_path);
  const std::string schema_path =
      path_or(cfg.schema_path, cfg.output_dir + "/schema.json");
  save_schema(corpus.schema, schema_path);

  json sig = json::object();
  for (int t = 0; t < corpus.schema.T(); ++t)
    sig[corpus.schema.topic_ids[static_cast<std::size_t>(t)]] =
        corpus.signatures[static_cast<std::size_t>(t)];
  const std::string sig_path = cfg.output_dir + "/signatures.json";
  std::ofstream sig_out = open_output(sig_path);
  sig_out << sig.dump(2) << "\n";

  std::ostringstream s;
  s << "synth: " << corpus.docs.size() << " docs, " << corpus.schema.T()
    << " topics, " << spec.phrases_per_topic
    << " signature phrases/topic (seed " << spec.seed << ")\ncorpus: "
    << corpus_path << "\nschema: " << schema_path
    << "\nsignatures: " << sig_path << "\n";
  return s.str();
}

std::map<std::string, TopicLabelSet> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open labels file: " + path);
  std::map<std::string, TopicLabelSet> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, e.what());
    }
    if (!j.is_object() || !j.contains("doc_id") || !j["doc_id"].is_string() ||
        !j.contains("topics") || !j["topics"].is_array())
      throw ParseError(path, lineno, "expected {doc_id, topics: [...]}");
    const std::string doc_id = j["doc_id"].get<std::string>();
    if (labels.count(doc_id) != 0)
      throw ParseError(path, lineno, "duplicate doc_id '" + doc_id + "'");
    TopicLabelSet set;
    for (const json& t : j["topics"]) {
      if (!t.is_string())
        throw ParseError(path, lineno, "topics entries must be strings");
      set.insert(t.get<std::string>());
    }
    labels[doc_id] = std::move(set);
  }
  return labels;
}

void save_labels(const std::map<std::string, TopicLabelSet>& labels,
                 const std::string& path) {
  std::ofstream out = open_output(path);
  for (const auto& [doc_id, topics] : labels) {
    json j;
    j["doc_id"] = doc_id;
    j["topics"] = topics;
    out << j.dump() << "\n";
  }
  if (!out) throw RuntimeFailure("failed writing labels file: " + path);
}

TopicSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
  if (!j.is_object() || !j.contains("topic_ids") || !j["topic_ids"].is_array() ||
      !j.contains("mode") || !j["mode"].is_string())
    throw ParseError(path, 1, "expected {topic_ids: [...], mode}");
  TopicSchema schema;
  for (const json& t : j["topic_ids"]) {
    if (!t.is_string())
      throw ParseError(path, 1, "topic_ids entries must be strings");
    schema.topic_ids.push_back(t.get<std::string>());
  }
  schema.mode = label_mode_from_string(j["mode"].get<std::string>());
  schema.validate();
  return schema;
}

void save_schema(const TopicSchema& schema, const std::string& path) {
  schema.validate();
  json j;
  j["topic_ids"] = schema.topic_ids;
  j["mode"] = label_mode_name(schema.mode);
  std::ofstream out = open_output(path);
  out << j.dump(2) << "\n";
  if (!out) throw RuntimeFailure("failed writing schema file: " + path);
}

SpanSets predictions_to_spans(const std::vector<KeyphrasePrediction>& preds) {
  SpanSets spans;
  for (const KeyphrasePrediction& p : preds)
    spans[p.doc_id].push_back({p.word_start, p.word_end});
  return spans;
}

SpanSets gold_to_spans(const std::vector<Document>& docs) {
  SpanSets spans;
  for (const Document& doc : docs) {
    std::vector<Span>& list = spans[doc.doc_id];
    for (const GoldSpan& g : doc.gold_spans)
      list.push_back({g.word_start, g.word_end});
  }
  return spans;
}

}  // namespace keyspan

#include "keyspan/config.hpp"

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "keyspan/errors.hpp"

namespace keyspan {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ConfigError("config field '" + key + "' expects " + want);
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_type(key, "a string");
  return v.get<std::string>();
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_type(key, "an integer");
  return v.get<int>();
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) bad_type(key, "a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad_type(key, "a boolean");
  return v.get<bool>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_type(key, "a non-negative integer");
  if (v.is_number_integer() && !v.is_number_unsigned() &&
      v.get<long long>() < 0)
    bad_type(key, "a non-negative integer");
  return v.get<std::uint64_t>();
}

// Single point of truth for the key-to-field mapping; both the JSON
// loader and the CLI override path funnel through here.
void set_field(RunConfig& cfg, const std::string& key, const json& v) {
  if (key == "corpus_path") { cfg.corpus_path = as_string(v, key); return; }
  if (key == "candidates_path") { cfg.candidates_path = as_string(v, key); return; }
  if (key == "schema_path") { cfg.schema_path = as_string(v, key); return; }
  if (key == "labels_path") { cfg.labels_path = as_string(v, key); return; }
  if (key == "removal_list_path") { cfg.removal_list_path = as_string(v, key); return; }
  if (key == "checkpoint_path") { cfg.checkpoint_path = as_string(v, key); return; }
  if (key == "predictions_path") { cfg.predictions_path = as_string(v, key); return; }
  if (key == "idf_corpus_path") { cfg.idf_corpus_path = as_string(v, key); return; }
  if (key == "output_dir") { cfg.output_dir = as_string(v, key); return; }
  if (key == "block_size") { cfg.block_size = as_int(v, key); return; }
  if (key == "overlap") { cfg.overlap = as_int(v, key); return; }
  if (key == "topic_T") { cfg.topic_T = as_int(v, key); return; }
  if (key == "topic_mode") {
    cfg.topic_mode = label_mode_from_string(as_string(v, key));
    return;
  }
  if (key == "rel_threshold") { cfg.rel_threshold = as_double(v, key); return; }
  if (key == "topic_iterations") { cfg.topic_iterations = as_int(v, key); return; }
  if (key == "topic_min_df") { cfg.topic_min_df = as_int(v, key); return; }
  if (key == "partial_variant") {
    cfg.partial_variant = partial_variant_from_string(as_string(v, key));
    return;
  }
  if (key == "per_type") { cfg.per_type = as_bool(v, key); return; }
  if (key == "seed") { cfg.seed = as_u64(v, key); return; }

  if (key == "train.batch_size") { cfg.train.batch_size = as_int(v, key); return; }
  if (key == "train.lr") { cfg.train.lr = as_double(v, key); return; }
  if (key == "train.epochs") { cfg.train.epochs = as_int(v, key); return; }
  if (key == "train.alpha") { cfg.train.alpha = as_double(v, key); return; }
  if (key == "train.head_dim") { cfg.train.head_dim = as_int(v, key); return; }
  if (key == "train.threshold") { cfg.train.threshold = as_double(v, key); return; }
  if (key == "train.seed") { cfg.train.seed = as_u64(v, key); return; }
  if (key == "train.explanation_agg") {
    cfg.train.explanation_agg = explanation_agg_from_string(as_string(v, key));
    return;
  }
  if (key == "train.depth") { cfg.train.depth = as_int(v, key); return; }
  if (key == "train.heads") { cfg.train.heads = as_int(v, key); return; }
  if (key == "train.max_len") { cfg.train.max_len = as_int(v, key); return; }
  if (key == "train.block_size") { cfg.train.block_size = as_int(v, key); return; }
  if (key == "train.overlap") { cfg.train.overlap = as_int(v, key); return; }
  if (key == "train.bpe_merges") { cfg.train.bpe_merges = as_int(v, key); return; }
  if (key == "train.nested_candidates") {
    cfg.train.nested_candidates = as_bool(v, key);
    return;
  }
  if (key == "train.dev_fraction") { cfg.train.dev_fraction = as_double(v, key); return; }
  if (key == "train.clip_norm") { cfg.train.clip_norm = as_double(v, key); return; }

  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
  if (block_size < 1) throw ConfigError("block_size must be >= 1");
  if (overlap < 0 || overlap >= block_size)
    throw ConfigError("overlap must satisfy 0 <= overlap < block_size");
  if (topic_T < 1) throw ConfigError("topic_T must be >= 1");
  if (!(rel_threshold > 0.0 && rel_threshold <= 1.0))
    throw ConfigError("rel_threshold must be in (0, 1]");
  if (topic_iterations < 1) throw ConfigError("topic_iterations must be >= 1");
  if (topic_min_df < 1) throw ConfigError("topic_min_df must be >= 1");
  train.validate();
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);

  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!root.is_object())
    throw ConfigError("config file " + path + " must hold a JSON object");

  RunConfig cfg;
  for (const auto& [key, value] : root.items()) {
    if (key == "train") {
      if (!value.is_object()) bad_type("train", "an object");
      for (const auto& [sub, sub_value] : value.items())
        set_field(cfg, "train." + sub, sub_value);
      continue;
    }
    set_field(cfg, key, value);
  }
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["corpus_path"] = cfg.corpus_path;
  j["candidates_path"] = cfg.candidates_path;
  j["schema_path"] = cfg.schema_path;
  j["labels_path"] = cfg.labels_path;
  j["removal_list_path"] = cfg.removal_list_path;
  j["checkpoint_path"] = cfg.checkpoint_path;
  j["predictions_path"] = cfg.predictions_path;
  j["idf_corpus_path"] = cfg.idf_corpus_path;
  j["output_dir"] = cfg.output_dir;
  j["block_size"] = cfg.block_size;
  j["overlap"] = cfg.overlap;

  json t;
  t["batch_size"] = cfg.train.batch_size;
  t["lr"] = cfg.train.lr;
  t["epochs"] = cfg.train.epochs;
  t["alpha"] = cfg.train.alpha;
  t["head_dim"] = cfg.train.head_dim;
  t["threshold"] = cfg.train.threshold;
  t["seed"] = cfg.train.seed;
  t["explanation_agg"] = explanation_agg_name(cfg.train.explanation_agg);
  t["depth"] = cfg.train.depth;
  t["heads"] = cfg.train.heads;
  t["max_len"] = cfg.train.max_len;
  t["block_size"] = cfg.train.block_size;
  t["overlap"] = cfg.train.overlap;
  t["bpe_merges"] = cfg.train.bpe_merges;
  t["nested_candidates"] = cfg.train.nested_candidates;
  t["dev_fraction"] = cfg.train.dev_fraction;
  t["clip_norm"] = cfg.train.clip_norm;
  j["train"] = t;

  j["topic_T"] = cfg.topic_T;
  j["topic_mode"] = label_mode_name(cfg.topic_mode);
  j["rel_threshold"] = cfg.rel_threshold;
  j["topic_iterations"] = cfg.topic_iterations;
  j["topic_min_df"] = cfg.topic_min_df;
  j["partial_variant"] = partial_variant_name(cfg.partial_variant);
  j["per_type"] = cfg.per_type;
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

void write_config_echo(const RunConfig& cfg, const std::string& output_dir) {
  std::filesystem::create_directories(output_dir);
  const std::string path = output_dir + "/config.json";
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write config echo: " + path);
  out << run_config_to_json(cfg);
  if (!out) throw RuntimeFailure("failed writing config echo: " + path);
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    v = value;  // bare words (paths, enum names) pass through as strings
  }
  if (v.is_object() || v.is_array() || v.is_null()) v = value;
  set_field(cfg, key, v);
}

}  // namespace keyspan

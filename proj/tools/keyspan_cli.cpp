#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "keyspan/config.hpp"
#include "keyspan/errors.hpp"
#include "keyspan/pipeline.hpp"

namespace {

// Leftover "--key value" or "--key=value" tokens become config overrides,
// so any field reachable in the config file is reachable from the command
// line (e.g. --train.lr 0.001 --block_size 256).
std::vector<std::pair<std::string, std::string>> collect_overrides(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0)
      throw keyspan::ConfigError("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2);
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      overrides.emplace_back(key.substr(0, eq), key.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size())
        throw keyspan::ConfigError("override --" + key + " needs a value");
      overrides.emplace_back(key, extras[++i]);
    }
  }
  return overrides;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw keyspan::ConfigError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"span-level keyphrase extraction via self-explaining topic "
               "classification"};
  app.require_subcommand(1);
  app.allow_extras();
  app.fallthrough();

  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON run configuration");
  auto* seed_opt =
      app.add_option("--seed", seed, "master seed (also applied to train.seed)");
  auto* out_opt = app.add_option("--output-dir", output_dir,
                                 "artifact directory (default: out)");

  auto* prepare = app.add_subcommand("prepare", "window corpus into blocks and chunk candidates");
  auto* label = app.add_subcommand("label", "derive topic labels (gold passthrough or topic model)");
  auto* train = app.add_subcommand("train", "train the self-explaining topic classifier");
  auto* extract = app.add_subcommand("extract", "extract keyphrases with a trained checkpoint");
  auto* baseline = app.add_subcommand("baseline", "tf-idf span baseline under the equal-K protocol");
  auto* evaluate = app.add_subcommand("evaluate", "span-match evaluation of a predictions file");
  auto* synth = app.add_subcommand("synth", "generate a planted-keyphrase synthetic corpus");

  std::string synth_spec_inline;
  std::string synth_spec_file;
  synth->add_option("--spec", synth_spec_inline, "generator spec as inline JSON");
  synth->add_option("--spec-file", synth_spec_file, "generator spec as a JSON file");

  for (CLI::App* sub : {prepare, label, train, extract, baseline, evaluate, synth})
    sub->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    keyspan::RunConfig cfg;
    if (!config_path.empty()) cfg = keyspan::load_run_config(config_path);
    for (const auto& [key, value] : collect_overrides(app.remaining(true)))
      keyspan::apply_override(cfg, key, value);
    if (seed_opt->count() > 0) {
      cfg.seed = seed;
      cfg.train.seed = seed;
    }
    if (out_opt->count() > 0) cfg.output_dir = output_dir;

    std::string summary;
    if (app.got_subcommand(prepare)) summary = keyspan::cmd_prepare(cfg);
    else if (app.got_subcommand(label)) summary = keyspan::cmd_label(cfg);
    else if (app.got_subcommand(train)) summary = keyspan::cmd_train(cfg);
    else if (app.got_subcommand(extract)) summary = keyspan::cmd_extract(cfg);
    else if (app.got_subcommand(baseline)) summary = keyspan::cmd_baseline(cfg);
    else if (app.got_subcommand(evaluate)) summary = keyspan::cmd_evaluate(cfg);
    else if (app.got_subcommand(synth)) {
      if (!synth_spec_inline.empty() && !synth_spec_file.empty())
        throw keyspan::ConfigError("--spec and --spec-file are exclusive");
      std::string spec_json = synth_spec_inline;
      if (!synth_spec_file.empty()) spec_json = read_file(synth_spec_file);
      summary = keyspan::cmd_synth(cfg, spec_json);
    }
    std::cout << summary;
    return 0;
  } catch (const keyspan::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const keyspan::RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

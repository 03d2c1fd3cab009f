// Command-line driver: one config file (plus section.key=value overrides)
// drives data preparation, training, evaluation, ablations, early-detection
// sweeps and explanation export.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad config or usage.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "mvan/evaluation.hpp"
#include "mvan/experiment_config.hpp"
#include "mvan/log.hpp"
#include "mvan/selfcheck.hpp"
#include "mvan/trainer.hpp"

namespace fs = std::filesystem;
using namespace mvan;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::string model_dir;
  bool quiet = false;
};

ExperimentConfig resolve_config(const Options& o) {
  std::string text;
  if (!o.config_path.empty()) {
    try {
      text = read_text_file(o.config_path);
    } catch (const ReportError& e) {
      throw ConfigError(e.what());
    }
  }
  ExperimentConfig c = parse_experiment_config(text, o.overrides);
  if (const char* env = std::getenv("MVAN_OUTPUT_DIR"); env && *env) c.output_dir = env;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  return c;
}

Dataset load_data(const ExperimentConfig& c) {
  if (c.synthetic) return gen_synthetic(*c.synthetic, c.synthetic_seed).dataset;
  LoadOptions lo;
  lo.builder = c.model.graph.builder;
  lo.max_retweets = c.max_retweets;
  return load_dataset(DatasetPaths::in_directory(*c.dataset_dir), lo);
}

std::string vocab_text(const Vocabulary& v) {
  std::string out;
  for (const auto& t : v.tokens()) out += t + "\n";
  return out;
}

Vocabulary parse_vocab(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  return Vocabulary::from_tokens(std::move(tokens));
}

std::string stats_csv(const FeatureStats& s) {
  std::ostringstream os;
  os << "slot,mean,std\n";
  for (std::size_t i = 0; i < kNumUserFeatures; ++i) {
    // hex floats keep the round trip exact
    char mean[64], sd[64];
    std::snprintf(mean, sizeof mean, "%a", s.mean[i]);
    std::snprintf(sd, sizeof sd, "%a", s.stddev[i]);
    os << i << "," << mean << "," << sd << "\n";
  }
  return os.str();
}

FeatureStats parse_stats(const std::string& text) {
  FeatureStats s;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::size_t n = 0;
  while (std::getline(in, line) && n < kNumUserFeatures) {
    std::size_t slot = 0;
    char mean[64] = {}, sd[64] = {};
    if (std::sscanf(line.c_str(), "%zu,%63[^,],%63s", &slot, mean, sd) != 3 || slot != n) {
      throw std::runtime_error("feature_stats.csv: malformed line '" + line + "'");
    }
    s.mean[n] = std::strtod(mean, nullptr);
    s.stddev[n] = std::strtod(sd, nullptr);
    ++n;
  }
  if (n != kNumUserFeatures) throw std::runtime_error("feature_stats.csv: expected one line per feature slot");
  return s;
}

std::string runs_csv(const std::vector<MetricsReport>& runs, std::uint64_t seed) {
  std::ostringstream os;
  os << "run,seed,accuracy,precision,recall,f1,tp,tn,fp,fn\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& m = runs[r];
    os << r << "," << seed + r << "," << format_fixed(m.accuracy) << "," << format_fixed(m.precision) << ","
       << format_fixed(m.recall) << "," << format_fixed(m.f1) << "," << m.counts.tp << "," << m.counts.tn << ","
       << m.counts.fp << "," << m.counts.fn << "\n";
  }
  return os.str();
}

std::vector<MetricsReport> repeated_runs(const Dataset& raw, const ExperimentConfig& c, ModelConfig model) {
  std::vector<MetricsReport> out;
  for (std::size_t r = 0; r < c.n_runs; ++r) {
    log_info(std::string(variant_name(model.variant)) + " run " + std::to_string(r + 1) + "/" +
             std::to_string(c.n_runs));
    out.push_back(run_experiment(raw, model, c.train_ratio, c.seed + r, c.embeddings).test.metrics);
  }
  return out;
}

int cmd_prepare(const ExperimentConfig& c) {
  const Dataset original = load_data(c);
  PreparedData data = prepare_data(original, c.model.text, c.train_ratio, c.seed);
  Dataset raw = original;
  const std::size_t fallbacks = impute_all(raw.examples);
  const Split& split = data.split;
  normalize_features(raw, split.train);
  write_dataset(Dataset{select(raw.examples, split.train), raw.stats}, c.output_dir / "prepared" / "train");
  write_dataset(Dataset{select(raw.examples, split.test), raw.stats}, c.output_dir / "prepared" / "test");
  write_text_file(c.output_dir / "prepared" / "vocab.txt", vocab_text(data.vocab));
  write_text_file(c.output_dir / "prepared" / "feature_stats.csv", stats_csv(data.stats));
  std::ostringstream summary;
  summary << "examples," << raw.examples.size() << "\ntrain," << split.train.size() << "\ntest," << split.test.size()
          << "\nvocab," << data.vocab.size() << "\nzero_fallback_graphs," << fallbacks << "\n";
  write_text_file(c.output_dir / "prepared" / "summary.csv", summary.str());
  return 0;
}

int cmd_train(const ExperimentConfig& c) {
  RunResult r = run_experiment(load_data(c), c.model, c.train_ratio, c.seed, c.embeddings);
  const fs::path dir = c.output_dir / "model";
  write_text_file(dir / "checkpoint.txt", checkpoint_string(r.trained.model.params()));
  write_text_file(dir / "vocab.txt", vocab_text(r.data.vocab));
  write_text_file(dir / "feature_stats.csv", stats_csv(r.data.stats));
  write_text_file(c.output_dir / "history.csv", history_csv(r.trained.history));
  log_info("best epoch " + std::to_string(r.trained.best_epoch) + ", test accuracy " +
           format_fixed(r.test.metrics.accuracy));
  return 0;
}

// Scores a saved model on the test split of the configured data.
int evaluate_saved(const ExperimentConfig& c, const fs::path& model_dir) {
  Vocabulary vocab = parse_vocab(read_text_file(model_dir / "vocab.txt"));
  FeatureStats stats = parse_stats(read_text_file(model_dir / "feature_stats.csv"));
  Model model(c.model, vocab.size(), parse_checkpoint(read_text_file(model_dir / "checkpoint.txt")));
  Dataset raw = load_data(c);
  // same split as the training run with this seed
  Split split = split_dataset(raw.examples.size(), c.train_ratio, Rng(c.seed).substream("split"));
  auto test = prepare_split(raw, split.test, vocab, stats, c.model.text.max_len, 1.0);
  ReportBundle b;
  b.metrics = evaluate(model, test).metrics;
  export_report(b, c.output_dir);
  return 0;
}

int cmd_evaluate(const ExperimentConfig& c, const Options& o) {
  if (!o.model_dir.empty()) return evaluate_saved(c, o.model_dir);
  auto runs = repeated_runs(load_data(c), c, c.model);
  ReportBundle b;
  b.metrics = runs.front();
  if (runs.size() > 1) b.aggregate = aggregate_runs(runs);
  export_report(b, c.output_dir);
  write_text_file(c.output_dir / "runs.csv", runs_csv(runs, c.seed));
  return 0;
}

int cmd_ablate(const ExperimentConfig& c) {
  Dataset raw = load_data(c);
  std::ostringstream table;
  table << "variant,n_runs,accuracy_mean,accuracy_std,precision_mean,recall_mean,f1_mean,summary\n";
  for (Variant v : {Variant::MVAN, Variant::MVAN_TSA, Variant::MVAN_PSA, Variant::TSAN, Variant::PSAN}) {
    ModelConfig m = c.model;
    m.variant = v;
    auto runs = repeated_runs(raw, c, m);
    const std::string name(variant_name(v));
    write_text_file(c.output_dir / "ablation" / (name + "_runs.csv"), runs_csv(runs, c.seed));
    table << name << "," << runs.size() << ",";
    if (runs.size() > 1) {
      auto a = aggregate_runs(runs);
      table << format_fixed(a.accuracy.mean) << "," << format_fixed(a.accuracy.stddev) << ","
            << format_fixed(a.precision.mean) << "," << format_fixed(a.recall.mean) << "," << format_fixed(a.f1.mean)
            << "," << format_mean_std(a.accuracy) << "\n";
    } else {
      const auto& m0 = runs.front();
      table << format_fixed(m0.accuracy) << ",," << format_fixed(m0.precision) << "," << format_fixed(m0.recall) << ","
            << format_fixed(m0.f1) << ",\n";
    }
  }
  write_text_file(c.output_dir / "ablation.csv", table.str());
  return 0;
}

int cmd_early_detect(const ExperimentConfig& c) {
  EarlyDetectionOptions eo;
  eo.train_ratio = c.train_ratio;
  eo.seed = c.seed;
  eo.train_truncated = c.train_truncated;
  ReportBundle b;
  b.curve = early_detection_schedule(c.model, load_data(c), c.keep_fractions, eo);
  export_report(b, c.output_dir);
  return 0;
}

std::string distribution_csv(const std::vector<Explanation>& expls) {
  std::ostringstream os;
  os << "subset,n_explanations,n_weights,mean,fraction_equal_one";
  for (int b = 0; b < 10; ++b) os << ",bin_" << b;
  os << "\n";
  auto row = [&](const char* name, std::optional<Label> l) {
    auto d = word_weight_distribution(expls, l);
    os << name << "," << d.n_explanations << "," << d.n_weights << "," << format_fixed(d.mean) << ","
       << format_fixed(d.fraction_equal_one);
    for (double p : d.bins) os << "," << format_fixed(p);
    os << "\n";
  };
  row("all", std::nullopt);
  row("fake", Label::Fake);
  row("true", Label::True);
  return os.str();
}

int cmd_explain(const ExperimentConfig& c) {
  RunResult r = run_experiment(load_data(c), c.model, c.train_ratio, c.seed, c.embeddings);
  std::vector<Explanation> expls;
  for (std::size_t i = 0; i < r.data.test.size(); ++i) expls.push_back(explain(r.data.test[i], r.test.predictions[i]));
  ReportBundle b;
  b.metrics = r.test.metrics;
  b.explanations = expls;
  export_report(b, c.output_dir);
  write_text_file(c.output_dir / "top_users.csv", top_users_csv(expls, c.top_k));
  write_text_file(c.output_dir / "word_weights.csv", distribution_csv(expls));
  write_text_file(c.output_dir / "edge_coeffs.csv", edge_coeffs_csv(r.data.test, r.test.predictions));
  return 0;
}

int cmd_gen_synthetic(const ExperimentConfig& c) {
  if (!c.synthetic) throw ConfigError("gen-synthetic needs a [synthetic] block");
  SyntheticDataset s = gen_synthetic(*c.synthetic, c.synthetic_seed);
  write_dataset(s.dataset, c.output_dir / "dataset");
  std::ostringstream truth;
  truth << "tweet_id,label,cue_token,shifted_users\n";
  for (const auto& t : s.truth) {
    truth << t.tweet_id << "," << label_name(t.label) << "," << t.cue_token.value_or("") << ",";
    for (std::size_t i = 0; i < t.shifted_users.size(); ++i) truth << (i ? ";" : "") << t.shifted_users[i];
    truth << "\n";
  }
  write_text_file(c.output_dir / "truth.csv", truth.str());
  return 0;
}

int cmd_selfcheck() {
  bool ok = true;
  for (const auto& item : run_selfcheck()) {
    std::cout << (item.passed ? "PASS " : "FAIL ") << item.name << ": " << item.detail << "\n";
    ok = ok && item.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view attention fake news detector"};
  app.require_subcommand(0, 1);
  Options o;
  bool reference = false;
  app.add_flag("--config-reference", reference, "Print every config key with its default and exit");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"prepare", "Validate, impute and normalize the data; write the split cache"},
      {"train", "Train one model; write checkpoint and history"},
      {"evaluate", "Train and test n_runs times (or score --model); write metrics"},
      {"ablate", "Run every model variant n_runs times"},
      {"early-detect", "Accuracy over truncated test cascades"},
      {"explain", "Word and user attention reports for the test split"},
      {"gen-synthetic", "Write a planted-signal dataset"},
      {"selfcheck", "Gradient and oracle checks"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "selfcheck") continue;
    sub->add_option("-c,--config", o.config_path, "Config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", o.overrides, "Override, section.key=value (repeatable)");
    sub->add_option("-o,--output", o.output_dir, "Output directory (beats MVAN_OUTPUT_DIR and the config)");
    sub->add_flag("-q,--quiet", o.quiet, "Only report warnings and errors");
    if (name == "evaluate") sub->add_option("--model", o.model_dir, "Directory written by train");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (reference) {
    std::cout << config_reference();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "selfcheck") {
    try {
      return cmd_selfcheck();
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  if (o.quiet) set_log_level(LogLevel::Warning);

  ExperimentConfig config;
  try {
    config = resolve_config(o);
    if (command == "gen-synthetic" && !config.synthetic) throw ConfigError("gen-synthetic needs a [synthetic] block");
    write_text_file(config.output_dir / "config.ini", config_to_ini(config));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ReportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (command == "prepare") return cmd_prepare(config);
    if (command == "train") return cmd_train(config);
    if (command == "evaluate") return cmd_evaluate(config, o);
    if (command == "ablate") return cmd_ablate(config);
    if (command == "early-detect") return cmd_early_detect(config);
    if (command == "explain") return cmd_explain(config);
    return cmd_gen_synthetic(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

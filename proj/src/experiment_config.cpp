#include "mvan/experiment_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace mvan {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// Shortest representation that reads back to the same double.
std::string show(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string show(std::size_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;  // nullopt: omit from the echo
};

SyntheticConfig& synthetic_block(ExperimentConfig& c) {
  if (!c.synthetic) c.synthetic.emplace();
  return *c.synthetic;
}

template <typename T>
std::optional<std::string> from_synthetic(const ExperimentConfig& c, T SyntheticConfig::*m) {
  if (!c.synthetic) return std::nullopt;
  return show((*c.synthetic).*m);
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto size_field = [&](S sec, S key, S help, std::function<std::size_t&(C&)> ref) {
      f.push_back({sec, key, help,
                   [ref, key](C& c, const S& v) { ref(c) = parse_number<std::size_t>(key, v); },
                   [ref](const C& c) -> std::optional<S> { return show(ref(const_cast<C&>(c))); }});
    };
    auto double_field = [&](S sec, S key, S help, std::function<double&(C&)> ref) {
      f.push_back({sec, key, help, [ref, key](C& c, const S& v) { ref(c) = parse_number<double>(key, v); },
                   [ref](const C& c) -> std::optional<S> { return show(ref(const_cast<C&>(c))); }});
    };
    auto bool_field = [&](S sec, S key, S help, std::function<bool&(C&)> ref) {
      f.push_back({sec, key, help, [ref, key](C& c, const S& v) { ref(c) = parse_bool(key, v); },
                   [ref](const C& c) -> std::optional<S> { return show(ref(const_cast<C&>(c))); }});
    };

    f.push_back({"data", "dataset_dir", "directory with tweets.jsonl, retweets.jsonl and users.jsonl",
                 [](C& c, const S& v) { c.dataset_dir = v; },
                 [](const C& c) -> std::optional<S> {
                   if (!c.dataset_dir) return std::nullopt;
                   return c.dataset_dir->generic_string();
                 }});
    f.push_back({"data", "embeddings", "word2vec text file; random vectors when unset",
                 [](C& c, const S& v) { c.embeddings = v; },
                 [](const C& c) -> std::optional<S> {
                   if (!c.embeddings) return std::nullopt;
                   return c.embeddings->generic_string();
                 }});
    size_field("data", "max_retweets", "keep at most this many earliest retweets per tweet (0 = all)",
               [](C& c) -> std::size_t& { return c.max_retweets; });

    auto syn_size = [&](S key, S help, std::size_t SyntheticConfig::*m) {
      f.push_back({"synthetic", key, help,
                   [m, key](C& c, const S& v) { synthetic_block(c).*m = parse_number<std::size_t>(key, v); },
                   [m](const C& c) { return from_synthetic(c, m); }});
    };
    auto syn_double = [&](S key, S help, double SyntheticConfig::*m) {
      f.push_back({"synthetic", key, help,
                   [m, key](C& c, const S& v) { synthetic_block(c).*m = parse_number<double>(key, v); },
                   [m](const C& c) { return from_synthetic(c, m); }});
    };
    syn_size("n_examples", "number of generated source tweets", &SyntheticConfig::n_examples);
    syn_double("text_signal", "probability that a class cue word is planted", &SyntheticConfig::text_signal_strength);
    syn_double("graph_signal", "probability that early retweeters get class profiles",
               &SyntheticConfig::graph_signal_strength);
    syn_size("vocab_size", "neutral vocabulary size", &SyntheticConfig::vocab_size);
    syn_double("mean_retweets", "mean cascade size", &SyntheticConfig::mean_retweets);
    syn_double("mean_words", "mean tweet length", &SyntheticConfig::mean_words);
    syn_double("planted_fraction", "share of earliest retweeters that carry the graph signal",
               &SyntheticConfig::planted_fraction);
    syn_double("missing_rate", "probability that a user profile is missing", &SyntheticConfig::missing_rate);
    f.push_back({"synthetic", "builder", "graph builder: chain(k) or parent_tree",
                 [](C& c, const S& v) {
                   try {
                     synthetic_block(c).builder = GraphBuilder::parse(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("synthetic.builder: ") + e.what());
                   }
                 },
                 [](const C& c) -> std::optional<S> {
                   if (!c.synthetic) return std::nullopt;
                   return c.synthetic->builder.to_string();
                 }});
    f.push_back({"synthetic", "seed", "generator seed",
                 [](C& c, const S& v) {
                   synthetic_block(c);
                   c.synthetic_seed = parse_number<std::uint64_t>("synthetic.seed", v);
                 },
                 [](const C& c) -> std::optional<S> {
                   if (!c.synthetic) return std::nullopt;
                   return std::to_string(c.synthetic_seed);
                 }});

    f.push_back({"model", "variant", "MVAN, MVAN-TSA, MVAN-PSA, TSAN or PSAN",
                 [](C& c, const S& v) {
                   try {
                     c.model.variant = parse_variant(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("model.variant: ") + e.what());
                   }
                 },
                 [](const C& c) -> std::optional<S> { return S(variant_name(c.model.variant)); }});
    size_field("model", "head_hidden", "width of the shared hidden layer before the output",
               [](C& c) -> std::size_t& { return c.model.head_hidden; });

    size_field("text", "embedding_dim", "word vector size", [](C& c) -> std::size_t& { return c.model.text.embedding_dim; });
    size_field("text", "hidden_size", "BiGRU hidden size per direction",
               [](C& c) -> std::size_t& { return c.model.text.hidden_size; });
    size_field("text", "layers", "stacked BiGRU layers", [](C& c) -> std::size_t& { return c.model.text.layers; });
    size_field("text", "attention_dim", "word attention projection size",
               [](C& c) -> std::size_t& { return c.model.text.attention_dim; });
    size_field("text", "max_len", "tokens kept per tweet", [](C& c) -> std::size_t& { return c.model.text.max_len; });
    size_field("text", "vocab_cap", "vocabulary cap including reserved tokens",
               [](C& c) -> std::size_t& { return c.model.text.vocab_cap; });
    bool_field("text", "trainable_embeddings", "update word vectors during training",
               [](C& c) -> bool& { return c.model.text.trainable_embeddings; });

    size_field("graph", "heads", "attention heads per layer", [](C& c) -> std::size_t& { return c.model.graph.heads; });
    size_field("graph", "hidden_per_head", "hidden layer width per head",
               [](C& c) -> std::size_t& { return c.model.graph.hidden_per_head; });
    size_field("graph", "output_dim", "last layer width", [](C& c) -> std::size_t& { return c.model.graph.output_dim; });
    size_field("graph", "layers", "attention layers", [](C& c) -> std::size_t& { return c.model.graph.layers; });
    double_field("graph", "leaky_slope", "LeakyReLU negative slope in attention scores",
                 [](C& c) -> double& { return c.model.graph.leaky_slope; });
    f.push_back({"graph", "readout", "node pooling: mean, max or first_by_order",
                 [](C& c, const S& v) {
                   try {
                     c.model.graph.readout = parse_readout(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("graph.readout: ") + e.what());
                   }
                 },
                 [](const C& c) -> std::optional<S> { return S(readout_name(c.model.graph.readout)); }});
    f.push_back({"graph", "builder", "graph builder for loaded datasets: chain(k) or parent_tree",
                 [](C& c, const S& v) {
                   try {
                     c.model.graph.builder = GraphBuilder::parse(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("graph.builder: ") + e.what());
                   }
                 },
                 [](const C& c) -> std::optional<S> { return c.model.graph.builder.to_string(); }});

    size_field("trainer", "batch_size", "examples per update", [](C& c) -> std::size_t& { return c.model.trainer.batch_size; });
    double_field("trainer", "learning_rate", "Adam step size",
                 [](C& c) -> double& { return c.model.trainer.learning_rate; });
    double_field("trainer", "dropout", "dropout rate", [](C& c) -> double& { return c.model.trainer.dropout; });
    size_field("trainer", "epochs", "maximum epochs", [](C& c) -> std::size_t& { return c.model.trainer.epochs; });
    size_field("trainer", "patience", "early stopping patience in epochs (0 disables)",
               [](C& c) -> std::size_t& { return c.model.trainer.patience; });
    double_field("trainer", "validation_fraction", "share of the training split held out for early stopping",
                 [](C& c) -> double& { return c.model.trainer.validation_fraction; });

    size_field("experiment", "n_runs", "independent runs; run r uses seed + r",
               [](C& c) -> std::size_t& { return c.n_runs; });
    f.push_back({"experiment", "seed", "base seed for splits, initialization and shuffling",
                 [](C& c, const S& v) { c.seed = parse_number<std::uint64_t>("experiment.seed", v); },
                 [](const C& c) -> std::optional<S> { return std::to_string(c.seed); }});
    double_field("experiment", "train_ratio", "training share of the train/test split",
                 [](C& c) -> double& { return c.train_ratio; });
    f.push_back({"experiment", "output_dir", "artifact directory (MVAN_OUTPUT_DIR overrides)",
                 [](C& c, const S& v) { c.output_dir = v; },
                 [](const C& c) -> std::optional<S> { return c.output_dir.generic_string(); }});
    f.push_back({"experiment", "keep_fractions", "comma-separated retweeter fractions for early-detect",
                 [](C& c, const S& v) {
                   c.keep_fractions.clear();
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) {
                     c.keep_fractions.push_back(parse_number<double>("experiment.keep_fractions", trim(item)));
                   }
                 },
                 [](const C& c) -> std::optional<S> {
                   S out;
                   for (std::size_t i = 0; i < c.keep_fractions.size(); ++i) {
                     if (i) out += ",";
                     out += show(c.keep_fractions[i]);
                   }
                   return out;
                 }});
    bool_field("experiment", "train_truncated", "early-detect: train on truncated graphs too",
               [](C& c) -> bool& { return c.train_truncated; });
    size_field("experiment", "top_k", "users listed per tweet by explain", [](C& c) -> std::size_t& { return c.top_k; });
    return f;
  }();
  return table;
}

const Field& find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset_dir.has_value() == synthetic.has_value()) {
    throw ConfigError("config needs exactly one data source: data.dataset_dir or a [synthetic] block");
  }
  if (n_runs == 0) throw ConfigError("experiment.n_runs must be at least 1");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("experiment.train_ratio must lie in (0, 1)");
  if (keep_fractions.empty()) throw ConfigError("experiment.keep_fractions is empty");
  for (double f : keep_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("experiment.keep_fractions entries must lie in (0, 1]");
  }
  try {
    model.validate();
    if (synthetic) synthetic->validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' is outside any [section]");
    for (const auto& [key, value] : body) find_field(section, key).set(config, trim(value.data()));
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override '" + o + "' is not section.key=value");
    }
    find_field(trim(o.substr(0, dot)), trim(o.substr(dot + 1, eq - dot - 1))).set(config, trim(o.substr(eq + 1)));
  }
  config.validate();
  return config;
}

std::string config_to_ini(const ExperimentConfig& config) {
  std::ostringstream os;
  std::string current;
  for (const auto& f : fields()) {
    auto v = f.get(config);
    if (!v) continue;
    if (f.section != current) {
      if (!current.empty()) os << "\n";
      os << "[" << f.section << "]\n";
      current = f.section;
    }
    os << f.key << " = " << *v << "\n";
  }
  return os.str();
}

std::string config_reference() {
  ExperimentConfig defaults;
  defaults.synthetic.emplace();
  std::ostringstream os;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      os << (current.empty() ? "" : "\n") << "[" << f.section << "]\n";
      current = f.section;
    }
    auto v = f.get(defaults);
    os << "; " << f.help << "\n" << (v ? "" : "; ") << f.key << " = " << v.value_or("") << "\n";
  }
  return os.str();
}

}  // namespace mvan

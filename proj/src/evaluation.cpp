#include "mvan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

namespace mvan {

Confusion confusion(const std::vector<Label>& predictions, const std::vector<Label>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw std::invalid_argument("confusion: no examples");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred_fake = predictions[i] == Label::Fake;
    const bool is_fake = labels[i] == Label::Fake;
    if (pred_fake && is_fake) ++c.tp;
    else if (!pred_fake && !is_fake) ++c.tn;
    else if (pred_fake) ++c.fp;
    else ++c.fn;
  }
  return c;
}

MetricsReport metrics(const Confusion& c) {
  if (c.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  MetricsReport m;
  m.counts = c;
  m.n_examples = c.total();
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp == 0) m.precision_undefined = true;
  else m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn == 0) m.recall_undefined = true;
  else m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (m.precision + m.recall == 0.0) m.f1_undefined = true;
  else m.f1 = 2.0 * m.recall * m.precision / (m.recall + m.precision);
  return m;
}

namespace {

MetricSummary summarize(const std::vector<double>& xs, const std::vector<double>& confidences) {
  const double n = static_cast<double>(xs.size());
  MetricSummary s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  // Rounding in the sum can move the mean off a constant sample; pin it so
  // identical runs report exactly zero spread.
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) s.mean = xs.front();
  double ss = 0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  for (double c : confidences) {
    const double t = boost::math::quantile(dist, 0.5 + c / 2.0);
    s.half_widths.push_back(t * s.stddev / std::sqrt(n));
  }
  return s;
}

}  // namespace

RunAggregate aggregate_runs(const std::vector<MetricsReport>& reports, const std::vector<double>& confidences) {
  if (reports.size() < 2) throw std::invalid_argument("aggregate_runs: at least two runs are required");
  for (double c : confidences) {
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("aggregate_runs: confidence must lie in (0,1)");
  }
  auto column = [&](double MetricsReport::*field) {
    std::vector<double> xs;
    for (const auto& r : reports) xs.push_back(r.*field);
    return summarize(xs, confidences);
  };
  RunAggregate a;
  a.n_runs = reports.size();
  a.confidences = confidences;
  a.accuracy = column(&MetricsReport::accuracy);
  a.precision = column(&MetricsReport::precision);
  a.recall = column(&MetricsReport::recall);
  a.f1 = column(&MetricsReport::f1);
  return a;
}

std::string format_mean_std(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f ± %.3f", s.mean, s.stddev);
  return buf;
}

Explanation explain(const PreparedExample& ex, const PredictionOutput& pred) {
  Explanation e;
  e.tweet_id = ex.tweet_id;
  e.label = ex.label;
  e.predicted = pred.predicted;
  e.probabilities = pred.probabilities;
  if (!pred.word_weights.empty()) {
    e.words = ex.tokens;
    e.word_weights.assign(pred.word_weights.begin(), pred.word_weights.begin() + ex.tokens.size());
  }
  for (std::size_t i = 0; i < ex.user_ids.size(); ++i) {
    UserAttention u;
    u.user_id = ex.user_ids[i];
    u.order = ex.orders[i];
    u.score = pred.node_scores.empty() ? 0.0 : pred.node_scores[i];
    u.features = ex.raw_features[i];
    e.users.push_back(std::move(u));
  }
  return e;
}

std::vector<UserAttention> top_users(const Explanation& e, std::size_t k) {
  std::vector<UserAttention> users = e.users;
  std::stable_sort(users.begin(), users.end(), [](const UserAttention& a, const UserAttention& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.order < b.order;
  });
  if (users.size() > k) users.resize(k);
  return users;
}

WeightDistribution word_weight_distribution(const std::vector<Explanation>& explanations, std::optional<Label> label) {
  WeightDistribution d;
  std::array<std::size_t, 10> counts{};
  std::size_t ones = 0;
  double total = 0;
  for (const auto& e : explanations) {
    if (label && e.label != *label) continue;
    ++d.n_explanations;
    for (double w : e.word_weights) {
      // Weights within rounding of a bin edge belong to the upper bin.
      auto bin = static_cast<std::size_t>(std::floor(w * 10.0 + 1e-9));
      ++counts[std::min<std::size_t>(bin, 9)];
      if (w >= 1.0 - 1e-12) ++ones;
      total += w;
      ++d.n_weights;
    }
  }
  if (d.n_weights > 0) {
    const double n = static_cast<double>(d.n_weights);
    for (std::size_t b = 0; b < 10; ++b) d.bins[b] = static_cast<double>(counts[b]) / n;
    d.mean = total / n;
    d.fraction_equal_one = static_cast<double>(ones) / n;
  }
  return d;
}

std::string format_fixed(double v) {
  if (!std::isfinite(v)) throw ReportError("cannot serialize non-finite value");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid "-0.000000" so equal inputs print identically.
  if (std::string_view(buf) == "-0.000000") return "0.000000";
  return buf;
}

namespace {

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

std::string features_json(const std::array<double, kNumUserFeatures>& f) {
  std::string out = "[";
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) out += ",";
    out += format_fixed(f[i]);
  }
  return out + "]";
}

}  // namespace

std::string metrics_json(const MetricsReport& m) {
  std::ostringstream os;
  os << "{\"schema_version\":" << kReportSchemaVersion << ",\"n_examples\":" << m.n_examples
     << ",\"tp\":" << m.counts.tp << ",\"tn\":" << m.counts.tn << ",\"fp\":" << m.counts.fp
     << ",\"fn\":" << m.counts.fn << ",\"accuracy\":" << format_fixed(m.accuracy)
     << ",\"precision\":" << format_fixed(m.precision) << ",\"recall\":" << format_fixed(m.recall)
     << ",\"f1\":" << format_fixed(m.f1) << ",\"precision_undefined\":" << (m.precision_undefined ? "true" : "false")
     << ",\"recall_undefined\":" << (m.recall_undefined ? "true" : "false")
     << ",\"f1_undefined\":" << (m.f1_undefined ? "true" : "false") << "}\n";
  return os.str();
}

MetricsReport parse_metrics_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ReportError(std::string("metrics JSON: ") + e.what());
  }
  if (!j.contains("schema_version") || j["schema_version"] != kReportSchemaVersion) {
    throw ReportError("metrics JSON: unsupported schema version");
  }
  // The counts are authoritative; the rounded ratios are recomputed from them.
  Confusion c;
  try {
    c.tp = j.at("tp").get<std::uint64_t>();
    c.tn = j.at("tn").get<std::uint64_t>();
    c.fp = j.at("fp").get<std::uint64_t>();
    c.fn = j.at("fn").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ReportError(std::string("metrics JSON: ") + e.what());
  }
  return metrics(c);
}

std::string aggregate_csv(const RunAggregate& a) {
  std::ostringstream os;
  os << "metric,n_runs,mean,std";
  for (double c : a.confidences) os << ",half_width_" << static_cast<int>(std::lround(c * 100));
  os << ",summary\n";
  auto row = [&](const char* name, const MetricSummary& s) {
    os << name << "," << a.n_runs << "," << format_fixed(s.mean) << "," << format_fixed(s.stddev);
    for (double h : s.half_widths) os << "," << format_fixed(h);
    os << "," << format_mean_std(s) << "\n";
  };
  row("accuracy", a.accuracy);
  row("precision", a.precision);
  row("recall", a.recall);
  row("f1", a.f1);
  return os.str();
}

std::string explanations_jsonl(const std::vector<Explanation>& explanations) {
  std::string out;
  for (const auto& e : explanations) {
    std::string line = "{\"schema_version\":" + std::to_string(kReportSchemaVersion);
    line += ",\"tweet_id\":" + json_string(e.tweet_id);
    line += ",\"label\":" + json_string(label_name(e.label));
    line += ",\"predicted\":" + json_string(label_name(e.predicted));
    line += ",\"probabilities\":[" + format_fixed(e.probabilities[0]) + "," + format_fixed(e.probabilities[1]) + "]";
    line += ",\"words\":[";
    for (std::size_t i = 0; i < e.words.size(); ++i) {
      if (i) line += ",";
      line += "{\"word\":" + json_string(e.words[i]) + ",\"weight\":" + format_fixed(e.word_weights[i]) + "}";
    }
    line += "],\"users\":[";
    for (std::size_t i = 0; i < e.users.size(); ++i) {
      const auto& u = e.users[i];
      if (i) line += ",";
      line += "{\"user_id\":" + json_string(u.user_id) + ",\"order\":" + std::to_string(u.order) +
              ",\"score\":" + format_fixed(u.score) + "}";
    }
    line += "]";
    auto top = top_users(e, 1);
    if (!top.empty()) {
      line += ",\"top_user\":{\"user_id\":" + json_string(top[0].user_id) + ",\"order\":" + std::to_string(top[0].order) +
              ",\"features\":" + features_json(top[0].features) + "}";
    }
    line += "}\n";
    out += line;
  }
  return out;
}

std::string curve_csv(std::vector<CurvePoint> points) {
  std::stable_sort(points.begin(), points.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.fraction < b.fraction; });
  std::string out = "fraction,accuracy\n";
  for (const auto& p : points) out += format_fixed(p.fraction) + "," + format_fixed(p.metrics.accuracy) + "\n";
  return out;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::string out = "epoch,train_loss,train_acc,val_acc\n";
  for (const auto& h : history) {
    out += std::to_string(h.epoch) + "," + format_fixed(h.train_loss) + "," + format_fixed(h.train_acc) + "," +
           (h.val_acc ? format_fixed(*h.val_acc) : std::string()) + "\n";
  }
  return out;
}

std::string edge_coeffs_csv(const std::vector<PreparedExample>& examples, const std::vector<PredictionOutput>& preds) {
  if (examples.size() != preds.size()) throw std::invalid_argument("edge_coeffs_csv: size mismatch");
  std::string out = "tweet_id,layer,head,src_user,dst_user,coeff\n";
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const auto& coeffs = preds[i].edge_coeffs;
    for (std::size_t l = 0; l < coeffs.size(); ++l) {
      for (std::size_t h = 0; h < coeffs[l].size(); ++h) {
        for (std::size_t e = 0; e < ex.graph.edge_count(); ++e) {
          out += ex.tweet_id + "," + std::to_string(l) + "," + std::to_string(h) + "," +
                 ex.user_ids[ex.graph.sources[e]] + "," + ex.user_ids[ex.graph.targets[e]] + "," +
                 format_fixed(coeffs[l][h][e]) + "\n";
        }
      }
    }
  }
  return out;
}

std::string top_users_csv(const std::vector<Explanation>& explanations, std::size_t k) {
  std::string out = "tweet_id,rank,user_id,order,score";
  for (const auto& name : kUserFeatureNames) out += "," + std::string(name);
  out += "\n";
  for (const auto& e : explanations) {
    auto top = top_users(e, k);
    for (std::size_t r = 0; r < top.size(); ++r) {
      out += e.tweet_id + "," + std::to_string(r + 1) + "," + top[r].user_id + "," + std::to_string(top[r].order) +
             "," + format_fixed(top[r].score);
      for (double f : top[r].features) out += "," + format_fixed(f);
      out += "\n";
    }
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ReportError("cannot write " + path.string());
  f << content;
  f.flush();
  if (!f) throw ReportError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ReportError("cannot read " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void export_report(const ReportBundle& bundle, const std::filesystem::path& dir) {
  if (bundle.metrics) write_text_file(dir / "metrics.json", metrics_json(*bundle.metrics));
  if (bundle.aggregate) write_text_file(dir / "aggregate.csv", aggregate_csv(*bundle.aggregate));
  if (bundle.explanations) write_text_file(dir / "explanations.jsonl", explanations_jsonl(*bundle.explanations));
  if (bundle.curve) write_text_file(dir / "early_detection.csv", curve_csv(*bundle.curve));
}

}  // namespace mvan

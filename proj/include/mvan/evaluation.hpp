#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvan/dataset.hpp"
#include "mvan/model.hpp"
#include "mvan/pipeline.hpp"

namespace mvan {

inline constexpr int kReportSchemaVersion = 1;

struct Confusion {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Positive class is fake.
Confusion confusion(const std::vector<Label>& predictions, const std::vector<Label>& labels);

struct MetricsReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::uint64_t n_examples = 0;
  Confusion counts;
  /// Set when a ratio had a zero denominator and was reported as 0.
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport metrics(const Confusion& c);

inline constexpr std::array<double, 3> kDefaultConfidences{0.90, 0.95, 0.98};

struct MetricSummary {
  double mean = 0;
  double stddev = 0;  // sample, n-1 denominator
  std::vector<double> half_widths;  // one per confidence level
};

struct RunAggregate {
  std::size_t n_runs = 0;
  std::vector<double> confidences;
  MetricSummary accuracy, precision, recall, f1;
};

RunAggregate aggregate_runs(const std::vector<MetricsReport>& reports,
                            const std::vector<double>& confidences = {kDefaultConfidences.begin(),
                                                                      kDefaultConfidences.end()});

/// "0.9234 ± 0.029"
std::string format_mean_std(const MetricSummary& s);

struct UserAttention {
  std::string user_id;
  std::uint64_t order = 0;
  double score = 0;
  std::array<double, kNumUserFeatures> features{};
};

struct Explanation {
  std::string tweet_id;
  Label label = Label::True;
  Label predicted = Label::True;
  std::array<double, 2> probabilities{};
  std::vector<std::string> words;
  std::vector<double> word_weights;  // aligned with `words`
  std::vector<UserAttention> users;  // retweet order
};

Explanation explain(const PreparedExample& ex, const PredictionOutput& pred);

/// Users by received attention descending, ties by retweet order ascending.
std::vector<UserAttention> top_users(const Explanation& e, std::size_t k);

struct WeightDistribution {
  std::array<double, 10> bins{};  // proportions over [0,0.1),...,[0.9,1.0]
  std::size_t n_weights = 0;
  std::size_t n_explanations = 0;
  double mean = 0;
  double fraction_equal_one = 0;
};

/// Histogram of word attention weights, optionally restricted to examples
/// whose true label is `label`.
WeightDistribution word_weight_distribution(const std::vector<Explanation>& explanations,
                                            std::optional<Label> label = std::nullopt);

struct CurvePoint {
  double fraction = 0;
  MetricsReport metrics;
};

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  std::optional<double> val_acc;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed six-decimal rendering used by every report file.
std::string format_fixed(double v);

std::string metrics_json(const MetricsReport& m);
MetricsReport parse_metrics_json(const std::string& text);
std::string aggregate_csv(const RunAggregate& a);
std::string explanations_jsonl(const std::vector<Explanation>& explanations);
/// Header "fraction,accuracy"; rows sorted by fraction.
std::string curve_csv(std::vector<CurvePoint> points);
std::string history_csv(const std::vector<HistoryRow>& history);
/// tweet_id,layer,head,src_user,dst_user,coeff for every edge coefficient.
std::string edge_coeffs_csv(const std::vector<PreparedExample>& examples, const std::vector<PredictionOutput>& preds);
std::string top_users_csv(const std::vector<Explanation>& explanations, std::size_t k);

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

struct ReportBundle {
  std::optional<MetricsReport> metrics;
  std::optional<RunAggregate> aggregate;
  std::optional<std::vector<Explanation>> explanations;
  std::optional<std::vector<CurvePoint>> curve;
};

/// Writes metrics.json, aggregate.csv, explanations.jsonl and
/// early_detection.csv for whichever parts of `bundle` are present.
void export_report(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace mvan

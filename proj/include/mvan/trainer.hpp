#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mvan/dataset.hpp"
#include "mvan/evaluation.hpp"
#include "mvan/model.hpp"
#include "mvan/pipeline.hpp"

namespace mvan {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainedModel {
  Model model;
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  std::optional<FeatureStats> stats;
};

struct TrainHooks {
  /// Called after every epoch; returning true ends training.
  std::function<bool(const HistoryRow&)> stop_after;
};

/// Mini-batch Adam training. When the config asks for a validation share,
/// that share of `train` is held out for early stopping and the best epoch
/// by validation accuracy (ties: lower validation loss) is returned;
/// otherwise the final parameters are.
TrainedModel train(const std::vector<PreparedExample>& train, const ModelConfig& config, std::size_t vocab_size,
                   const EmbeddingTable* pretrained = nullptr, const TrainHooks& hooks = {});

struct Evaluation {
  MetricsReport metrics;
  std::vector<PredictionOutput> predictions;
  double mean_loss = 0;
};

Evaluation evaluate(const Model& model, const std::vector<PreparedExample>& examples);

/// Accuracy of `model` on `examples` (no dropout).
double accuracy(const Model& model, const std::vector<PreparedExample>& examples);

struct RunResult {
  TrainedModel trained;
  PreparedData data;
  Evaluation test;
};

/// Split with `seed`, prepare, train with trainer seed `seed`, evaluate.
/// With `embeddings`, word vectors are read from that word2vec text file.
RunResult run_experiment(const Dataset& raw, ModelConfig config, double train_ratio, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& embeddings = std::nullopt);

struct EarlyDetectionOptions {
  double train_ratio = 0.7;
  std::uint64_t seed = 1;
  /// Train on graphs truncated to the same fraction instead of full graphs.
  bool train_truncated = false;
};

/// Test metrics for each keep fraction, sorted ascending by fraction.
std::vector<CurvePoint> early_detection_schedule(const ModelConfig& config, const Dataset& raw,
                                                 std::vector<double> fractions,
                                                 const EarlyDetectionOptions& options = {});

}  // namespace mvan

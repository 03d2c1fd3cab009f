#include "mvan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvan/log.hpp"
#include "mvan/text_encoder.hpp"

namespace mvan {

namespace {

struct Holdout {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> validation;
};

Holdout hold_out(std::size_t n, double fraction, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Holdout h;
  const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    h.fit = std::move(idx);
    return h;
  }
  rng.shuffle(idx);
  h.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  h.fit.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(h.validation.begin(), h.validation.end());
  std::sort(h.fit.begin(), h.fit.end());
  return h;
}

std::vector<PreparedExample> pick(const std::vector<PreparedExample>& all, const std::vector<std::size_t>& idx) {
  std::vector<PreparedExample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

void zero_pad_row(Model& model) {
  if (!model.params().contains(text::kEmbeddingName)) return;
  Tensor& emb = model.params().at(text::kEmbeddingName);
  for (std::size_t c = 0; c < emb.cols(); ++c) emb(kPadIndex, c) = 0.0;
}

}  // namespace

TrainedModel train(const std::vector<PreparedExample>& examples, const ModelConfig& config, std::size_t vocab_size,
                   const EmbeddingTable* pretrained, const TrainHooks& hooks) {
  config.validate();
  if (examples.empty()) throw std::invalid_argument("train: empty training split");
  const TrainerConfig& tc = config.trainer;
  const Rng root(tc.seed);

  Holdout h = hold_out(examples.size(), tc.validation_fraction, root.substream("validation"));
  const std::vector<PreparedExample> fit = pick(examples, h.fit);
  const std::vector<PreparedExample> val = pick(examples, h.validation);

  TrainedModel out{Model(config, vocab_size, root.substream("init"), pretrained), {}, 0, std::nullopt};
  Model& model = out.model;
  AdamState adam;
  adam.learning_rate = tc.learning_rate;

  std::optional<ParameterStore> best;
  double best_acc = -1.0, best_loss = 0.0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(fit.size());
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = root.substream("shuffle").substream(epoch);
    shuffle.shuffle(order);
    Rng dropout = root.substream("dropout").substream(epoch);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      ad::Tape tape;
      ForwardContext ctx = model.context(tape, true, &dropout);
      ad::Var total;
      double batch_loss = 0.0;
      ad::Gradients grads;
      try {
        std::vector<ad::Var> losses;
        for (std::size_t k = start; k < end; ++k) {
          const PreparedExample& ex = fit[order[k]];
          auto f = model.forward(ctx, ex);
          losses.push_back(ad::cross_entropy(f.logits, label_index(ex.label)));
        }
        total = ad::scale(ad::sum(ad::concat_rows(losses)), 1.0 / static_cast<double>(end - start));
        batch_loss = total.value()[0];
        if (!std::isfinite(batch_loss)) throw NumericError("loss is " + std::to_string(batch_loss));
        grads = tape.gradient(total);
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches + 1) + ": " + e.what());
      }
      adam_step(model.params(), grads, adam, model.frozen());
      zero_pad_row(model);
      loss_sum += batch_loss;
      ++batches;
    }

    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(batches);
    row.train_acc = accuracy(model, fit);
    if (!val.empty()) {
      Evaluation ev = evaluate(model, val);
      row.val_acc = ev.metrics.accuracy;
      const bool better = ev.metrics.accuracy > best_acc || (ev.metrics.accuracy == best_acc && ev.mean_loss < best_loss);
      if (better) {
        best_acc = ev.metrics.accuracy;
        best_loss = ev.mean_loss;
        best = model.params();
        out.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      out.best_epoch = epoch;
    }
    out.history.push_back(row);
    log_debug("epoch " + std::to_string(epoch) + " loss " + std::to_string(row.train_loss) + " train_acc " +
              std::to_string(row.train_acc));
    if (hooks.stop_after && hooks.stop_after(row)) break;
    if (!val.empty() && tc.patience > 0 && since_best >= tc.patience) break;
  }
  if (best) model.params() = std::move(*best);
  return out;
}

Evaluation evaluate(const Model& model, const std::vector<PreparedExample>& examples) {
  Evaluation ev;
  ev.predictions = model.predict_all(examples);
  std::vector<Label> pred, gold;
  double total = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    pred.push_back(ev.predictions[i].predicted);
    gold.push_back(examples[i].label);
    total += loss(ev.predictions[i].probabilities, examples[i].label);
  }
  ev.metrics = metrics(confusion(pred, gold));
  ev.mean_loss = total / static_cast<double>(examples.size());
  return ev;
}

double accuracy(const Model& model, const std::vector<PreparedExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) correct += model.predict(ex).predicted == ex.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

RunResult run_experiment(const Dataset& raw, ModelConfig config, double train_ratio, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& embeddings) {
  config.trainer.seed = seed;
  PreparedData data = prepare_data(raw, config.text, train_ratio, seed);
  std::optional<EmbeddingTable> table;
  if (embeddings) {
    Rng init = Rng(seed).substream("embeddings");
    table = load_embeddings(embeddings, data.vocab, config.text.embedding_dim, init);
    table->trainable = config.text.trainable_embeddings;
  }
  TrainedModel trained = train(data.train, config, data.vocab.size(), table ? &*table : nullptr);
  trained.stats = data.stats;
  Evaluation test = evaluate(trained.model, data.test);
  return RunResult{std::move(trained), std::move(data), std::move(test)};
}

std::vector<CurvePoint> early_detection_schedule(const ModelConfig& config, const Dataset& raw,
                                                 std::vector<double> fractions,
                                                 const EarlyDetectionOptions& options) {
  if (fractions.empty()) throw std::invalid_argument("early detection: no fractions given");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("early detection: fraction must lie in (0,1]");
  }
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

  ModelConfig cfg = config;
  cfg.trainer.seed = options.seed;
  PreparedData data = prepare_data(raw, cfg.text, options.train_ratio, options.seed);

  std::optional<TrainedModel> full;
  if (!options.train_truncated) full.emplace(train(data.train, cfg, data.vocab.size()));

  std::vector<CurvePoint> curve;
  for (double f : fractions) {
    std::vector<PreparedExample> test =
        f == 1.0 ? data.test : prepare_split(raw, data.split.test, data.vocab, data.stats, cfg.text.max_len, f);
    CurvePoint p;
    p.fraction = f;
    if (full) {
      p.metrics = evaluate(full->model, test).metrics;
    } else {
      std::vector<PreparedExample> tr =
          f == 1.0 ? data.train : prepare_split(raw, data.split.train, data.vocab, data.stats, cfg.text.max_len, f);
      p.metrics = evaluate(train(tr, cfg, data.vocab.size()).model, test).metrics;
    }
    curve.push_back(p);
  }
  return curve;
}

}  // namespace mvan

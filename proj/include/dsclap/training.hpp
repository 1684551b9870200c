#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <vector>

#include "dsclap/checkpoint.hpp"
#include "dsclap/config.hpp"
#include "dsclap/data.hpp"
#include "dsclap/errors.hpp"
#include "dsclap/model.hpp"
#include "dsclap/objectives.hpp"
#include "dsclap/optimizer.hpp"
#include "dsclap/random.hpp"

namespace dsclap {

/// One line of the loss log, written once per optimizer step.
struct LossLogRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // global step, 1-based
  double audio_nce = 0.0;
  double text_nce = 0.0;
  double audio_match = 0.0;
  double text_match = 0.0;
  double total = 0.0;
  double scale = 0.0;  // exp(logit_scale) after the step

  bool operator==(const LossLogRecord&) const = default;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<LossLogRecord> log;
};

namespace detail {

inline std::vector<std::size_t> epoch_order(std::uint64_t seed,
                                            std::uint64_t epoch,
                                            std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "epoch", epoch));
  rng.shuffle(order);
  return order;
}

inline SampleBatch gather(const std::vector<PairedSample>& data,
                          const std::vector<std::size_t>& order,
                          std::size_t begin, std::size_t count) {
  SampleBatch batch(count);
  for (std::size_t i = 0; i < count; ++i) batch[i] = &data[order[begin + i]];
  return batch;
}

/// Keeps the softmax sharpness bounded, mirroring the clamp used by
/// CLIP-style trainers.
inline void clamp_logit_scale(Model& model) {
  double cap = std::log(kMaxSimilarityScale);
  if (model.encoder.logit_scale > cap) model.encoder.logit_scale = cap;
}

inline void check_finite_loss(const LossBreakdown& b) {
  if (!std::isfinite(b.total)) throw NumericalError("non-finite loss");
}

/// Runs epochs [ckpt.epochs_completed, ckpt.config.epochs) of contrastive
/// pretraining in place. The schedule is a pure function of (seed, epoch),
/// so resuming from a checkpoint replays the identical batch sequence.
inline std::vector<LossLogRecord> pretrain_epochs(
    Checkpoint& ckpt, const std::vector<PairedSample>& data) {
  const TrainConfig& cfg = ckpt.config;
  validate(cfg);
  if (cfg.batch_size < 2)
    throw InvalidArgument("batch size too small for contrastive pretraining");
  if (data.empty()) throw InvalidArgument("empty dataset");
  if (data.size() < cfg.batch_size)
    throw InvalidArgument("dataset smaller than one batch");

  std::size_t batches = data.size() / cfg.batch_size;  // drop last partial
  AdamWOptions opt = cfg.optimizer();

  std::vector<LossLogRecord> log;
  log.reserve((cfg.epochs - ckpt.epochs_completed) * batches);
  for (std::uint64_t e = ckpt.epochs_completed; e < cfg.epochs; ++e) {
    std::vector<std::size_t> order = epoch_order(cfg.seed, e, data.size());
    for (std::size_t b = 0; b < batches; ++b) {
      SampleBatch batch =
          gather(data, order, b * cfg.batch_size, cfg.batch_size);
      PretrainStep step =
          pretrain_backward(ckpt.model, batch, cfg.lambda_weight,
                            cfg.gamma_weight, cfg.hard_negatives);
      check_finite_loss(step.breakdown);
      adamw_step(ckpt.model, step.grads, ckpt.optimizer, opt);
      clamp_logit_scale(ckpt.model);
      ckpt.global_step += 1;

      log.push_back({static_cast<std::size_t>(e) + 1, ckpt.global_step,
                     step.breakdown.audio_nce, step.breakdown.text_nce,
                     step.breakdown.audio_match, step.breakdown.text_match,
                     step.breakdown.total,
                     std::exp(ckpt.model.encoder.logit_scale)});
    }
    ckpt.epochs_completed = e + 1;
  }
  return log;
}

}  // namespace detail

/// Contrastive pretraining from random init. Deterministic in cfg.seed.
inline PretrainResult pretrain(const TrainConfig& cfg,
                               const std::vector<PairedSample>& data) {
  PretrainResult result;
  result.checkpoint.config = cfg;
  result.checkpoint.model.encoder =
      init_encoder_params(cfg.model, derive_seed(cfg.seed, "init"));
  result.checkpoint.task = Task::none;
  result.log = detail::pretrain_epochs(result.checkpoint, data);
  return result;
}

/// Continues an interrupted run up to `total_epochs`. Training the same
/// data to the same horizon in one go or across a save/load boundary gives
/// bit-identical parameters and the same loss sequence.
inline PretrainResult resume_pretrain(const Checkpoint& from,
                                      const std::vector<PairedSample>& data,
                                      std::size_t total_epochs) {
  if (total_epochs < from.epochs_completed)
    throw InvalidArgument("total epochs below completed epochs");
  PretrainResult result;
  result.checkpoint = from;
  result.checkpoint.config.epochs = total_epochs;
  result.log = detail::pretrain_epochs(result.checkpoint, data);
  return result;
}

// ============================================================================
// Fine-tuning and evaluation
// ============================================================================

/// Supervised fine-tuning of a classification head over the concatenated
/// pooled features, starting from the checkpoint's encoders. Frozen encoders
/// are excluded from the optimizer entirely, so decay cannot move them; the
/// contrastive projections and the logit scale are never trained here.
inline Model finetune(const Checkpoint& ckpt, Task task,
                      const FreezeMask& freeze,
                      const std::vector<PairedSample>& train_data,
                      const TrainConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::size_t classes = task_class_count(task);
  if (train_data.empty()) throw InvalidArgument("empty dataset");
  if (train_data.size() < cfg.batch_size)
    throw InvalidArgument("dataset smaller than one batch");
  for (const PairedSample& s : train_data) detail::checked_label(s, classes);

  Model model = ckpt.model;
  attach_classifier(model, classes, seed);
  OptimizerState state;
  AdamWOptions opt = cfg.optimizer();

  auto trainable = [&](const std::string& name) {
    if (name.rfind("classifier.", 0) == 0) return true;
    if (name.rfind("audio_encoder.", 0) == 0)
      return freeze.audio_encoder_trainable;
    if (name.rfind("text_encoder.", 0) == 0)
      return freeze.text_encoder_trainable;
    return false;  // projections and logit scale stay fixed
  };

  std::size_t batches = train_data.size() / cfg.batch_size;
  for (std::uint64_t e = 0; e < cfg.epochs; ++e) {
    std::vector<std::size_t> order = detail::epoch_order(
        derive_seed(seed, "finetune"), e, train_data.size());
    for (std::size_t b = 0; b < batches; ++b) {
      SampleBatch batch = detail::gather(train_data, order,
                                         b * cfg.batch_size, cfg.batch_size);
      ClassifierStep step = classifier_backward(model, batch, classes, freeze);
      if (!std::isfinite(step.loss)) throw NumericalError("non-finite loss");
      adamw_step(model, step.grads, state, opt, trainable);
    }
  }
  return model;
}

/// Accuracy plus the task-specific metric: false rejection rate for the
/// binary task (positives are label 1), macro-F1 over the classes present
/// in the references for the multiclass task.
inline Metrics evaluate(const Model& model,
                        const std::vector<PairedSample>& test, Task task) {
  if (test.empty()) throw InvalidArgument("empty test set");
  std::size_t classes = task_class_count(task);

  std::size_t correct = 0;
  std::vector<std::size_t> true_count(classes, 0);
  std::vector<std::size_t> pred_count(classes, 0);
  std::vector<std::size_t> true_positive(classes, 0);
  std::size_t positives = 0;
  std::size_t false_negatives = 0;

  for (const PairedSample& s : test) {
    int label = detail::checked_label(s, classes);
    int pred = predict(model, s);
    if (pred == label) ++correct;
    true_count[static_cast<std::size_t>(label)] += 1;
    pred_count[static_cast<std::size_t>(pred)] += 1;
    if (pred == label) true_positive[static_cast<std::size_t>(label)] += 1;
    if (task == Task::mdsd && label == 1) {
      ++positives;
      if (pred != 1) ++false_negatives;
    }
  }

  Metrics metrics;
  metrics.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  if (task == Task::mdsd && positives > 0)
    metrics.frr = static_cast<double>(false_negatives) /
                  static_cast<double>(positives);
  if (task == Task::mcic) {
    double f1_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (true_count[c] == 0) continue;
      ++present;
      double tp = static_cast<double>(true_positive[c]);
      double precision =
          pred_count[c] ? tp / static_cast<double>(pred_count[c]) : 0.0;
      double recall = tp / static_cast<double>(true_count[c]);
      if (precision + recall > 0.0)
        f1_sum += 2.0 * precision * recall / (precision + recall);
    }
    metrics.macro_f1 = present ? f1_sum / static_cast<double>(present) : 0.0;
  }
  return metrics;
}

// ============================================================================
// Protocol harnesses
// ============================================================================

struct SweepRow {
  std::size_t size = 0;
  std::vector<double> per_seed;  // aligned with cfg.seeds
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Fine-tunes on nested subsets of the training data, one run per
/// (size, seed), reporting mean and range of test accuracy per size.
/// The subsets are prefixes of one seed-keyed shuffle, so a larger size
/// always contains the smaller ones. With `parallel`, runs execute
/// concurrently; every run derives its own seeds, so results are identical
/// either way.
inline std::vector<SweepRow> data_size_sweep(
    const Checkpoint& ckpt, const std::vector<std::size_t>& sizes, Task task,
    const FreezeMask& freeze, const std::vector<PairedSample>& train_data,
    const std::vector<PairedSample>& test_data, const TrainConfig& cfg,
    bool parallel = false) {
  if (sizes.empty()) throw InvalidArgument("empty size list");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    if (sizes[i] >= sizes[i + 1])
      throw InvalidArgument("sizes must be strictly ascending");
  if (sizes.back() > train_data.size())
    throw InvalidArgument("size exceeds available training data");

  auto run_one = [&](std::size_t size, std::uint64_t seed) {
    std::vector<std::size_t> order(train_data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "subset"));
    rng.shuffle(order);
    std::vector<PairedSample> subset;
    subset.reserve(size);
    for (std::size_t i = 0; i < size; ++i) subset.push_back(train_data[order[i]]);

    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    Model model = finetune(ckpt, task, freeze, subset, run_cfg, seed);
    return evaluate(model, test_data, task).accuracy;
  };

  std::vector<SweepRow> rows;
  rows.reserve(sizes.size());
  for (std::size_t size : sizes) {
    SweepRow row;
    row.size = size;
    row.per_seed.resize(cfg.seeds.size());
    if (parallel) {
      std::vector<std::future<double>> futures;
      futures.reserve(cfg.seeds.size());
      for (std::uint64_t seed : cfg.seeds)
        futures.push_back(std::async(std::launch::async, run_one, size, seed));
      for (std::size_t i = 0; i < futures.size(); ++i)
        row.per_seed[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        row.per_seed[i] = run_one(size, cfg.seeds[i]);
    }
    row.min = row.per_seed[0];
    row.max = row.per_seed[0];
    double sum = 0.0;
    for (double acc : row.per_seed) {
      sum += acc;
      row.min = std::min(row.min, acc);
      row.max = std::max(row.max, acc);
    }
    row.mean = sum / static_cast<double>(row.per_seed.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

struct AlignmentReport {
  double mean_info_nce = 0.0;  // mean of (L_a + L_t)/2 over batches
  double retrieval_top1 = 0.0; // audio -> text within-batch retrieval
  std::size_t batches = 0;
};

/// Held-out alignment probe: batches the pairs, computes the contrastive
/// loss, and scores within-batch audio-to-text top-1 retrieval.
inline AlignmentReport evaluate_alignment(const Model& model,
                                          const std::vector<PairedSample>& data,
                                          std::size_t batch_size) {
  if (batch_size < 2) throw InvalidArgument("batch size too small for contrastive loss");
  if (data.size() < batch_size)
    throw InvalidArgument("dataset smaller than one batch");

  AlignmentReport report;
  std::size_t hits = 0;
  std::size_t anchors = 0;
  double nce_sum = 0.0;

  std::size_t batches = data.size() / batch_size;
  for (std::size_t b = 0; b < batches; ++b) {
    SampleBatch batch(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i)
      batch[i] = &data[b * batch_size + i];
    EmbeddingBatch emb = embed_pairs(batch, model.encoder);
    SimilarityMatrix sim = similarity_matrix(emb, model.encoder.logit_scale);
    auto [la, lt] = info_nce(sim);
    nce_sum += 0.5 * (la + lt);
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < batch_size; ++j)
        if (sim.scores(i, j) > sim.scores(i, best)) best = j;
      if (best == i) ++hits;
      ++anchors;
    }
  }
  report.batches = batches;
  report.mean_info_nce = nce_sum / static_cast<double>(batches);
  report.retrieval_top1 = static_cast<double>(hits) / static_cast<double>(anchors);
  return report;
}

}  // namespace dsclap

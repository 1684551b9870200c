#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsclap/encoders.hpp"
#include "dsclap/errors.hpp"
#include "dsclap/optimizer.hpp"

namespace dsclap {

enum class Task : std::uint8_t { none = 0, mdsd = 1, mcic = 2 };

/// mdsd: binary device-directed detection. mcic: 15-way intent
/// classification.
inline std::size_t task_class_count(Task task) {
  switch (task) {
    case Task::mdsd: return 2;
    case Task::mcic: return 15;
    case Task::none: break;
  }
  throw InvalidArgument("task has no classes");
}

inline std::string_view to_string(Task task) {
  switch (task) {
    case Task::none: return "none";
    case Task::mdsd: return "mdsd";
    case Task::mcic: return "mcic";
  }
  throw InvalidArgument("unknown task");
}

inline Task task_from_string(std::string_view name) {
  if (name == "none") return Task::none;
  if (name == "mdsd") return Task::mdsd;
  if (name == "mcic") return Task::mcic;
  throw InvalidArgument("unknown task: " + std::string(name));
}

/// Full-scale defaults. Call desk_scale() for settings sized to a single
/// desktop core and a few thousand synthetic pairs.
struct TrainConfig {
  EncoderConfig model;
  double learning_rate = 2e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  double lambda_weight = 0.5;
  double gamma_weight = 0.5;
  std::size_t hard_negatives = 1;  // K
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds = {1, 12, 123, 1234, 12345};
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const TrainConfig&) const = default;

  AdamWOptions optimizer() const {
    return {learning_rate, beta1, beta2, epsilon, weight_decay};
  }

  /// Small-corpus settings: short schedule, small batches, and a learning
  /// rate sized for training the toy encoders from random init (the
  /// full-scale rate assumes pretrained backbones and barely moves a fresh
  /// model within a few hundred steps).
  static TrainConfig desk_scale() {
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 5;
    cfg.learning_rate = 1e-2;
    return cfg;
  }
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw InvalidArgument("learning rate must be positive");
  if (cfg.batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (cfg.lambda_weight < 0.0 || cfg.gamma_weight < 0.0)
    throw InvalidArgument("loss weights must be non-negative");
  if (cfg.hard_negatives < 1)
    throw InvalidArgument("hard negative count must be positive");
  if (cfg.seeds.empty()) throw InvalidArgument("seed list must be non-empty");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw InvalidArgument("beta out of range");
  if (cfg.epsilon <= 0.0) throw InvalidArgument("epsilon must be positive");
  if (cfg.weight_decay < 0.0) throw InvalidArgument("weight decay must be non-negative");
  if (cfg.model.embed_dim < 1 || cfg.model.proj_dim < 1 ||
      cfg.model.vocab_size < 2 || cfg.model.frame_window < 1 ||
      cfg.model.frame_stride < 1 || cfg.model.max_text_len < 1 ||
      cfg.model.max_audio_len < cfg.model.frame_window)
    throw InvalidArgument("invalid encoder configuration");
}

/// frr is reported for the binary task only; macro_f1 for the multiclass
/// task only.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> frr;
  std::optional<double> macro_f1;
};

}  // namespace dsclap

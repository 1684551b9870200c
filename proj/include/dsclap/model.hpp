#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dsclap/data.hpp"
#include "dsclap/encoders.hpp"
#include "dsclap/errors.hpp"
#include "dsclap/matrix.hpp"
#include "dsclap/objectives.hpp"
#include "dsclap/random.hpp"

namespace dsclap {

// ============================================================================
// Model container and tensor naming
// ============================================================================

/// Dual encoder plus an optional downstream classification head. The head is
/// attached only for fine-tuning; an empty weight matrix means "absent".
struct Model {
  EncoderParams encoder;
  AffineHead classifier;

  bool operator==(const Model&) const = default;
};

/// Same shape as the model, holding d(loss)/d(parameter). `logit_scale`
/// carries the gradient of the log-inverse-temperature.
using ModelGrads = Model;

struct FreezeMask {
  bool audio_encoder_trainable = true;
  bool text_encoder_trainable = true;
};

inline bool has_classifier(const Model& m) { return !m.classifier.weight.empty(); }

inline Model zeros_like(const Model& m) {
  Model z;
  z.encoder.config = m.encoder.config;
  z.encoder.audio_weight = Matrix(m.encoder.audio_weight.rows(),
                                  m.encoder.audio_weight.cols());
  z.encoder.audio_bias = Vec(m.encoder.audio_bias.size(), 0.0);
  z.encoder.token_embedding = Matrix(m.encoder.token_embedding.rows(),
                                     m.encoder.token_embedding.cols());
  z.encoder.audio_projection.weight =
      Matrix(m.encoder.audio_projection.weight.rows(),
             m.encoder.audio_projection.weight.cols());
  z.encoder.audio_projection.bias =
      Vec(m.encoder.audio_projection.bias.size(), 0.0);
  z.encoder.text_projection.weight =
      Matrix(m.encoder.text_projection.weight.rows(),
             m.encoder.text_projection.weight.cols());
  z.encoder.text_projection.bias =
      Vec(m.encoder.text_projection.bias.size(), 0.0);
  z.encoder.logit_scale = 0.0;
  if (has_classifier(m)) {
    z.classifier.weight = Matrix(m.classifier.weight.rows(),
                                 m.classifier.weight.cols());
    z.classifier.bias = Vec(m.classifier.bias.size(), 0.0);
  }
  return z;
}

/// One named parameter array viewed as flat doubles. Scalars have rank 0.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
  std::vector<std::size_t> dims;
};

/// Visits every present tensor in a fixed canonical order; this order is
/// also the checkpoint array order.
template <class Fn>
inline void visit_tensors(Model& m, Fn&& fn) {
  auto mat = [&](const char* name, Matrix& x) {
    fn(TensorRef{name, x.flat().data(), x.size(), {x.rows(), x.cols()}});
  };
  auto vec = [&](const char* name, Vec& x) {
    fn(TensorRef{name, x.data(), x.size(), {x.size()}});
  };
  mat("audio_encoder.weight", m.encoder.audio_weight);
  vec("audio_encoder.bias", m.encoder.audio_bias);
  mat("text_encoder.embedding", m.encoder.token_embedding);
  mat("audio_projection.weight", m.encoder.audio_projection.weight);
  vec("audio_projection.bias", m.encoder.audio_projection.bias);
  mat("text_projection.weight", m.encoder.text_projection.weight);
  vec("text_projection.bias", m.encoder.text_projection.bias);
  fn(TensorRef{"logit_scale", &m.encoder.logit_scale, 1, {}});
  if (has_classifier(m)) {
    mat("classifier.weight", m.classifier.weight);
    vec("classifier.bias", m.classifier.bias);
  }
}

/// Head over the concatenated pooled features [h_audio, h_text].
inline void attach_classifier(Model& m, std::size_t class_count,
                              std::uint64_t seed) {
  if (class_count < 2) throw InvalidArgument("class count must be at least 2");
  std::size_t in_dim = 2 * m.encoder.config.embed_dim;
  Rng rng(derive_seed(seed, "classifier"));
  double std = 1.0 / std::sqrt(static_cast<double>(in_dim));
  m.classifier.weight = Matrix(class_count, in_dim);
  for (double& v : m.classifier.weight.flat()) v = std * rng.gaussian();
  m.classifier.bias = Vec(class_count, 0.0);
}

// ============================================================================
// Batched embedding with backward trace
// ============================================================================

/// Intermediate activations kept from the forward pass so the backward pass
/// can chain through pooling, projection, and normalization exactly.
struct BatchTrace {
  std::vector<Matrix> audio_activations;  // per sample: frames x embed_dim
  Matrix audio_pooled;                    // N x embed_dim
  Matrix text_pooled;                     // N x embed_dim
  Vec audio_norms;
  Vec text_norms;
};

using SampleBatch = std::vector<const PairedSample*>;

inline EmbeddingBatch embed_pairs(const SampleBatch& batch,
                                  const EncoderParams& params,
                                  BatchTrace* trace = nullptr) {
  if (batch.empty()) throw InvalidArgument("empty embedding batch");
  std::size_t n = batch.size();
  std::size_t d = params.config.proj_dim;
  std::size_t e = params.config.embed_dim;

  EmbeddingBatch out{Matrix(n, d), Matrix(n, d)};
  if (trace) {
    trace->audio_activations.assign(n, Matrix());
    trace->audio_pooled = Matrix(n, e);
    trace->text_pooled = Matrix(n, e);
    trace->audio_norms.assign(n, 0.0);
    trace->text_norms.assign(n, 0.0);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const PairedSample& s = *batch[i];
    Matrix* acts = trace ? &trace->audio_activations[i] : nullptr;
    Vec h_a = encode_audio(s.audio, params, acts);
    Vec h_t = encode_text(s.text, params);

    double norm_a = 0.0;
    double norm_t = 0.0;
    Vec z_a = project(h_a, params.audio_projection, &norm_a);
    Vec z_t = project(h_t, params.text_projection, &norm_t);
    std::copy(z_a.begin(), z_a.end(), out.audio.row(i).begin());
    std::copy(z_t.begin(), z_t.end(), out.text.row(i).begin());

    if (trace) {
      std::copy(h_a.begin(), h_a.end(), trace->audio_pooled.row(i).begin());
      std::copy(h_t.begin(), h_t.end(), trace->text_pooled.row(i).begin());
      trace->audio_norms[i] = norm_a;
      trace->text_norms[i] = norm_t;
    }
  }
  return out;
}

// ============================================================================
// Pretraining objective through the encoders
// ============================================================================

/// Forward-only loss on a batch of pairs.
inline LossBreakdown pretrain_loss(const Model& model, const SampleBatch& batch,
                                   double lambda_weight, double gamma_weight,
                                   std::size_t k) {
  EmbeddingBatch emb = embed_pairs(batch, model.encoder);
  return dsclap_loss(emb, model.encoder.logit_scale, lambda_weight,
                     gamma_weight, k);
}

struct PretrainStep {
  LossBreakdown breakdown;
  ModelGrads grads;
};

/// Full analytical backward pass: objective -> embeddings -> projections ->
/// pooled features -> encoder parameters.
inline PretrainStep pretrain_backward(const Model& model,
                                      const SampleBatch& batch,
                                      double lambda_weight,
                                      double gamma_weight, std::size_t k) {
  BatchTrace trace;
  EmbeddingBatch emb = embed_pairs(batch, model.encoder, &trace);
  LossWithGradients lw = loss_backward(emb, model.encoder.logit_scale,
                                       lambda_weight, gamma_weight, k);

  PretrainStep step;
  step.breakdown = lw.breakdown;
  step.grads = zeros_like(model);
  step.grads.encoder.logit_scale = lw.grads.logit_scale;

  std::size_t e = model.encoder.config.embed_dim;
  Vec grad_h(e);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::fill(grad_h.begin(), grad_h.end(), 0.0);
    project_backward(model.encoder.audio_projection, trace.audio_pooled.row(i),
                     emb.audio.row(i), trace.audio_norms[i],
                     lw.grads.audio.row(i),
                     step.grads.encoder.audio_projection, grad_h);
    encode_audio_backward(batch[i]->audio, model.encoder,
                          trace.audio_activations[i], grad_h,
                          step.grads.encoder.audio_weight,
                          step.grads.encoder.audio_bias);

    std::fill(grad_h.begin(), grad_h.end(), 0.0);
    project_backward(model.encoder.text_projection, trace.text_pooled.row(i),
                     emb.text.row(i), trace.text_norms[i],
                     lw.grads.text.row(i),
                     step.grads.encoder.text_projection, grad_h);
    encode_text_backward(batch[i]->text, grad_h,
                         step.grads.encoder.token_embedding);
  }
  return step;
}

// ============================================================================
// Downstream classification
// ============================================================================

namespace detail {

inline int checked_label(const PairedSample& s, std::size_t class_count) {
  if (!s.label) throw InvalidArgument("missing label: " + s.id);
  if (*s.label < 0 || static_cast<std::size_t>(*s.label) >= class_count)
    throw InvalidArgument("label out of range: " + s.id);
  return *s.label;
}

/// logits = W [h_a, h_t] + b
inline Vec classifier_logits(const Model& m, const Vec& h_a, const Vec& h_t) {
  std::size_t e = m.encoder.config.embed_dim;
  std::size_t classes = m.classifier.weight.rows();
  Vec logits(m.classifier.bias);
  for (std::size_t c = 0; c < classes; ++c) {
    auto w = m.classifier.weight.row(c);
    double acc = 0.0;
    for (std::size_t j = 0; j < e; ++j) acc += w[j] * h_a[j];
    for (std::size_t j = 0; j < e; ++j) acc += w[e + j] * h_t[j];
    logits[c] += acc;
  }
  return logits;
}

}  // namespace detail

/// Mean softmax cross-entropy on labeled pairs, forward only.
inline double classifier_loss(const Model& model, const SampleBatch& batch,
                              std::size_t class_count) {
  if (!has_classifier(model)) throw InvalidArgument("model has no classifier");
  if (batch.empty()) throw InvalidArgument("empty batch");
  if (model.classifier.weight.rows() != class_count)
    throw InvalidArgument("classifier arity mismatch");

  double loss = 0.0;
  for (const PairedSample* s : batch) {
    int label = detail::checked_label(*s, class_count);
    Vec h_a = encode_audio(s->audio, model.encoder);
    Vec h_t = encode_text(s->text, model.encoder);
    Vec logits = detail::classifier_logits(model, h_a, h_t);
    loss += detail::softmax_loss(
        logits.size(), [&](std::size_t j) { return logits[j]; },
        logits[static_cast<std::size_t>(label)]);
  }
  return loss / static_cast<double>(batch.size());
}

struct ClassifierStep {
  double loss = 0.0;
  ModelGrads grads;
};

/// Cross-entropy backward. The head always trains; each encoder trains only
/// when its freeze flag allows. Projections and the logit scale are not in
/// this graph at all, so fine-tuning can never move them.
inline ClassifierStep classifier_backward(const Model& model,
                                          const SampleBatch& batch,
                                          std::size_t class_count,
                                          const FreezeMask& freeze) {
  if (!has_classifier(model)) throw InvalidArgument("model has no classifier");
  if (batch.empty()) throw InvalidArgument("empty batch");
  if (model.classifier.weight.rows() != class_count)
    throw InvalidArgument("classifier arity mismatch");

  ClassifierStep step;
  step.grads = zeros_like(model);
  std::size_t e = model.encoder.config.embed_dim;
  double inv = 1.0 / static_cast<double>(batch.size());

  Vec grad_h_a(e);
  Vec grad_h_t(e);
  for (const PairedSample* s : batch) {
    int label = detail::checked_label(*s, class_count);
    Matrix acts;
    Vec h_a = encode_audio(s->audio, model.encoder,
                           freeze.audio_encoder_trainable ? &acts : nullptr);
    Vec h_t = encode_text(s->text, model.encoder);
    Vec logits = detail::classifier_logits(model, h_a, h_t);
    double lse = detail::log_sum_exp(
        logits.size(), [&](std::size_t j) { return logits[j]; });
    step.loss += detail::softmax_loss(
        logits.size(), [&](std::size_t j) { return logits[j]; },
        logits[static_cast<std::size_t>(label)]);

    std::fill(grad_h_a.begin(), grad_h_a.end(), 0.0);
    std::fill(grad_h_t.begin(), grad_h_t.end(), 0.0);
    for (std::size_t c = 0; c < class_count; ++c) {
      double d = inv * (std::exp(logits[c] - lse) -
                        (static_cast<std::size_t>(label) == c ? 1.0 : 0.0));
      step.grads.classifier.bias[c] += d;
      auto wrow = model.classifier.weight.row(c);
      auto grow = step.grads.classifier.weight.row(c);
      for (std::size_t j = 0; j < e; ++j) {
        grow[j] += d * h_a[j];
        grow[e + j] += d * h_t[j];
        grad_h_a[j] += d * wrow[j];
        grad_h_t[j] += d * wrow[e + j];
      }
    }
    if (freeze.audio_encoder_trainable)
      encode_audio_backward(s->audio, model.encoder, acts, grad_h_a,
                            step.grads.encoder.audio_weight,
                            step.grads.encoder.audio_bias);
    if (freeze.text_encoder_trainable)
      encode_text_backward(s->text, grad_h_t,
                           step.grads.encoder.token_embedding);
  }
  step.loss *= inv;
  return step;
}

/// Argmax class; ties resolve to the smallest class id.
inline int predict(const Model& model, const PairedSample& sample) {
  if (!has_classifier(model)) throw InvalidArgument("model has no classifier");
  Vec h_a = encode_audio(sample.audio, model.encoder);
  Vec h_t = encode_text(sample.text, model.encoder);
  Vec logits = detail::classifier_logits(model, h_a, h_t);
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return static_cast<int>(best);
}

}  // namespace dsclap

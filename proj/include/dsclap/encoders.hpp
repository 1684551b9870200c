#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsclap/errors.hpp"
#include "dsclap/matrix.hpp"
#include "dsclap/random.hpp"

namespace dsclap {

// ============================================================================
// Domain types
// ============================================================================

/// Raw audio, unitless amplitude samples.
struct Waveform {
  Vec samples;

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

/// Token ids, each < vocab_size of the model consuming them.
struct TokenSequence {
  std::vector<std::uint32_t> tokens;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct EncoderConfig {
  std::size_t embed_dim = 32;  // utterance representation width
  std::size_t proj_dim = 64;   // shared embedding space width
  std::size_t vocab_size = 64;
  std::size_t frame_window = 64;  // audio samples per frame
  std::size_t frame_stride = 32;
  std::size_t max_audio_len = 80000;
  std::size_t max_text_len = 16;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// One affine map. Used both for the per-modality projection heads
/// (proj_dim x embed_dim) and for classification heads.
struct AffineHead {
  Matrix weight;
  Vec bias;

  friend bool operator==(const AffineHead&, const AffineHead&) = default;
};

/// Scale multiplier applied to raw cosine similarities is exp(logit_scale);
/// the forward never lets it exceed this bound (training clamps after updates).
inline constexpr double kMaxSimilarityScale = 100.0;

inline double initial_logit_scale() { return std::log(1.0 / 0.07); }

/// Every trainable quantity of the two encoders plus the shared-space heads.
///
/// Audio path: strided frames -> shared affine map -> tanh -> mean pool.
/// Text path:  embedding-table lookup -> mean pool.
/// Both pooled vectors then go through their projection head and are
/// L2-normalized, so dot products in the shared space are cosines.
struct EncoderParams {
  EncoderConfig config;
  Matrix audio_weight;     // embed_dim x frame_window
  Vec audio_bias;          // embed_dim
  Matrix token_embedding;  // vocab_size x embed_dim
  AffineHead audio_projection;
  AffineHead text_projection;
  double logit_scale = 2.6592600369327783;  // log(1/0.07)

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

inline EncoderParams init_encoder_params(const EncoderConfig& config,
                                         std::uint64_t seed) {
  if (config.embed_dim == 0 || config.proj_dim == 0 || config.vocab_size == 0)
    throw InvalidArgument("encoder dimensions must be positive");
  if (config.frame_window == 0 || config.frame_stride == 0)
    throw InvalidArgument("frame window and stride must be positive");

  EncoderParams p;
  p.config = config;
  Rng rng(derive_seed(seed, "encoder-init"));

  double audio_std = 1.0 / std::sqrt(static_cast<double>(config.frame_window));
  p.audio_weight = Matrix(config.embed_dim, config.frame_window);
  for (double& w : p.audio_weight.flat()) w = audio_std * rng.gaussian();
  // Nonzero bias: the pooled tanh features must keep a DC component, or
  // averaging over frame phases washes out tone frequency and amplitude.
  p.audio_bias.resize(config.embed_dim);
  for (double& b : p.audio_bias) b = 0.5 * rng.gaussian();

  p.token_embedding = Matrix(config.vocab_size, config.embed_dim);
  for (double& w : p.token_embedding.flat()) w = rng.gaussian();

  double proj_std = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
  auto init_head = [&](AffineHead& head) {
    head.weight = Matrix(config.proj_dim, config.embed_dim);
    for (double& w : head.weight.flat()) w = proj_std * rng.gaussian();
    head.bias.assign(config.proj_dim, 0.0);
  };
  init_head(p.audio_projection);
  init_head(p.text_projection);

  p.logit_scale = initial_logit_scale();
  return p;
}

// ============================================================================
// Validation
// ============================================================================

inline void validate_waveform(const Waveform& w, const EncoderConfig& config) {
  if (w.samples.empty()) throw InvalidArgument("empty input");
  if (w.samples.size() > config.max_audio_len)
    throw InvalidArgument("waveform longer than max_audio_len");
  if (!all_finite(w.samples)) throw NumericalError("non-finite audio sample");
}

inline void validate_tokens(const TokenSequence& t,
                            const EncoderConfig& config) {
  if (t.tokens.empty()) throw InvalidArgument("empty input");
  if (t.tokens.size() > config.max_text_len)
    throw InvalidArgument("token sequence longer than max_text_len");
  for (std::uint32_t id : t.tokens) {
    if (id >= config.vocab_size)
      throw InvalidArgument("token out of vocabulary");
  }
}

// ============================================================================
// Forward operations
// ============================================================================

/// Component-wise arithmetic mean of the frames.
inline Vec mean_pool(const std::vector<Vec>& frames) {
  if (frames.empty()) throw InvalidArgument("empty input");
  Vec pooled(frames.front().size(), 0.0);
  for (const Vec& frame : frames) {
    if (frame.size() != pooled.size())
      throw InvalidArgument("frames differ in dimension");
    if (!all_finite(frame)) throw NumericalError("non-finite frame entry");
    axpy(1.0, frame, pooled);
  }
  double inv = 1.0 / static_cast<double>(frames.size());
  for (double& v : pooled) v *= inv;
  return pooled;
}

/// Number of strided frames in a waveform of the given length.
inline std::size_t audio_frame_count(std::size_t length,
                                     const EncoderConfig& config) {
  if (length < config.frame_window) throw InvalidArgument("audio too short");
  return (length - config.frame_window) / config.frame_stride + 1;
}

/// Utterance-level audio representation: per frame tanh(W * frame + b),
/// then mean pool. When `activations` is given it receives the per-frame
/// tanh outputs (frame_count x embed_dim), which the backward pass reuses.
inline Vec encode_audio(const Waveform& w, const EncoderParams& p,
                        Matrix* activations = nullptr) {
  const EncoderConfig& config = p.config;
  validate_waveform(w, config);
  std::size_t frame_count = audio_frame_count(w.samples.size(), config);

  Matrix local;
  Matrix& acts = activations ? *activations : local;
  acts = Matrix(frame_count, config.embed_dim);

  for (std::size_t f = 0; f < frame_count; ++f) {
    std::span<const double> frame(w.samples.data() + f * config.frame_stride,
                                  config.frame_window);
    auto out = acts.row(f);
    for (std::size_t r = 0; r < config.embed_dim; ++r)
      out[r] = std::tanh(dot(p.audio_weight.row(r), frame) + p.audio_bias[r]);
  }

  Vec pooled(config.embed_dim, 0.0);
  for (std::size_t f = 0; f < frame_count; ++f) axpy(1.0, acts.row(f), pooled);
  double inv = 1.0 / static_cast<double>(frame_count);
  for (double& v : pooled) v *= inv;
  return pooled;
}

/// Utterance-level text representation: mean of the embedding-table rows.
inline Vec encode_text(const TokenSequence& t, const EncoderParams& p) {
  validate_tokens(t, p.config);
  Vec pooled(p.config.embed_dim, 0.0);
  for (std::uint32_t id : t.tokens) axpy(1.0, p.token_embedding.row(id), pooled);
  double inv = 1.0 / static_cast<double>(t.tokens.size());
  for (double& v : pooled) v *= inv;
  return pooled;
}

/// z = (W h + b) / ||W h + b||. The norm of the pre-normalized vector is
/// written to `norm_out` when given (the backward pass needs it).
inline Vec project(const Vec& h, const AffineHead& head,
                   double* norm_out = nullptr) {
  if (head.weight.cols() != h.size())
    throw InvalidArgument("projection input dimension mismatch");
  if (!all_finite(h)) throw NumericalError("non-finite projection input");

  Vec z(head.weight.rows());
  for (std::size_t r = 0; r < z.size(); ++r)
    z[r] = dot(head.weight.row(r), h) + head.bias[r];

  double norm = l2_norm(z);
  if (norm == 0.0) throw InvalidArgument("degenerate projection");
  for (double& v : z) v /= norm;
  if (norm_out) *norm_out = norm;
  return z;
}

// ============================================================================
// Backward kernels
//
// Each kernel accumulates (+=) into the given gradient buffers, so one
// buffer can collect contributions from a whole batch.
// ============================================================================

/// Backward through z = normalize(W h + b).
/// grad_h is accumulated; head_grad.{weight,bias} likewise.
inline void project_backward(const AffineHead& head,
                             std::span<const double> h,
                             std::span<const double> z, double norm,
                             std::span<const double> grad_z,
                             AffineHead& head_grad, Vec& grad_h) {
  // dy = (grad_z - z <z, grad_z>) / norm, with y the pre-normalized vector.
  double zg = dot(z, grad_z);
  Vec dy(z.size());
  for (std::size_t r = 0; r < z.size(); ++r)
    dy[r] = (grad_z[r] - z[r] * zg) / norm;

  for (std::size_t r = 0; r < dy.size(); ++r) {
    axpy(dy[r], h, head_grad.weight.row(r));
    head_grad.bias[r] += dy[r];
    axpy(dy[r], head.weight.row(r), grad_h);
  }
}

/// Backward through encode_audio given the cached tanh activations.
inline void encode_audio_backward(const Waveform& w, const EncoderParams& p,
                                  const Matrix& activations, const Vec& grad_h,
                                  Matrix& audio_weight_grad,
                                  Vec& audio_bias_grad) {
  const EncoderConfig& config = p.config;
  std::size_t frame_count = activations.rows();
  double inv = 1.0 / static_cast<double>(frame_count);
  for (std::size_t f = 0; f < frame_count; ++f) {
    std::span<const double> frame(w.samples.data() + f * config.frame_stride,
                                  config.frame_window);
    auto acts = activations.row(f);
    for (std::size_t r = 0; r < config.embed_dim; ++r) {
      double da = inv * grad_h[r] * (1.0 - acts[r] * acts[r]);
      axpy(da, frame, audio_weight_grad.row(r));
      audio_bias_grad[r] += da;
    }
  }
}

/// Backward through encode_text: mean over looked-up rows.
inline void encode_text_backward(const TokenSequence& t, const Vec& grad_h,
                                 Matrix& embedding_grad) {
  double inv = 1.0 / static_cast<double>(t.tokens.size());
  for (std::uint32_t id : t.tokens)
    axpy(inv, grad_h, embedding_grad.row(id));
}

}  // namespace dsclap

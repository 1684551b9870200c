#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "dsclap/errors.hpp"
#include "dsclap/matrix.hpp"

namespace dsclap {

// ============================================================================
// Domain types
// ============================================================================

/// N unit-normalized shared-space vectors per modality. Row i of `audio`
/// and row i of `text` form the positive pair.
struct EmbeddingBatch {
  Matrix audio;  // N x proj_dim
  Matrix text;   // N x proj_dim
};

/// scores(i, j) = scale * <audio_i, text_j>, with scale = exp(logit_scale).
struct SimilarityMatrix {
  Matrix scores;
  double scale = 1.0;
};

/// Per anchor i: the k most similar non-matching indices, in descending
/// similarity order. `text_negatives[i]` indexes text rows competing with
/// audio anchor i (row i of the scores); `audio_negatives[i]` indexes audio
/// rows competing with text anchor i (column i).
struct HardNegativeSet {
  std::vector<std::vector<std::size_t>> text_negatives;
  std::vector<std::vector<std::size_t>> audio_negatives;
};

struct LossBreakdown {
  double audio_nce = 0.0;   // contrastive loss, audio anchors
  double text_nce = 0.0;    // contrastive loss, text anchors
  double audio_match = 0.0; // matching loss against mined text negatives
  double text_match = 0.0;  // matching loss against mined audio negatives
  double lambda_weight = 0.0;
  double gamma_weight = 0.0;
  double total = 0.0;
};

/// d(loss)/d(scores) for one loss pair, mean-reduced over the batch.
struct PairGrads {
  Matrix audio;  // gradient of the audio-anchored component
  Matrix text;   // gradient of the text-anchored component
};

/// Gradients of the combined objective w.r.t. the embedding batch and the
/// log-inverse-temperature scalar.
struct LossGradients {
  Matrix audio;
  Matrix text;
  double logit_scale = 0.0;
};

namespace detail {

/// log(sum_j exp(x_j)) over an index subset, max-shifted so any |x| up to
/// ~1e4 stays finite.
template <class GetValue>
inline double log_sum_exp(std::size_t count, GetValue&& value) {
  double max_val = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < count; ++j) max_val = std::max(max_val, value(j));
  double sum = 0.0;
  for (std::size_t j = 0; j < count; ++j) sum += std::exp(value(j) - max_val);
  return max_val + std::log(sum);
}

/// log_sum_exp(x) - x_pivot, evaluated as (max - x_pivot) + log(sum of
/// shifted exponentials). Adding the max back and subtracting the pivot
/// separately would lose the small-loss digits to cancellation; this form
/// is exact when the pivot is the max, and non-negative by construction
/// whenever the pivot belongs to the set.
template <class GetValue>
inline double softmax_loss(std::size_t count, GetValue&& value,
                           double pivot) {
  double max_val = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < count; ++j) max_val = std::max(max_val, value(j));
  double sum = 0.0;
  for (std::size_t j = 0; j < count; ++j) sum += std::exp(value(j) - max_val);
  return (max_val - pivot) + std::log(sum);
}

}  // namespace detail

// ============================================================================
// Validation
// ============================================================================

/// Shape and row-norm check. The unit-norm tolerance is deliberately looser
/// than what encoders produce (1e-9) so that finite-difference probes of
/// batch entries still pass through.
inline void validate_batch(const EmbeddingBatch& batch, double tol = 1e-4) {
  if (!batch.audio.same_shape(batch.text))
    throw InvalidArgument("embedding batch shape mismatch");
  if (batch.audio.rows() == 0) throw InvalidArgument("empty embedding batch");
  if (!all_finite(batch.audio.flat()) || !all_finite(batch.text.flat()))
    throw NumericalError("non-finite embedding");
  for (std::size_t i = 0; i < batch.audio.rows(); ++i) {
    if (std::abs(l2_norm(batch.audio.row(i)) - 1.0) > tol ||
        std::abs(l2_norm(batch.text.row(i)) - 1.0) > tol)
      throw InvalidArgument("embedding row is not unit-normalized");
  }
}

// ============================================================================
// Forward operations
// ============================================================================

/// scores(i, j) = exp(log_scale) * <audio_i, text_j>.
inline SimilarityMatrix similarity_matrix(const EmbeddingBatch& batch,
                                          double log_scale) {
  validate_batch(batch);
  SimilarityMatrix sim;
  sim.scale = std::exp(log_scale);
  if (!std::isfinite(sim.scale))
    throw NumericalError("non-finite similarity scale");
  sim.scores = multiply_transposed(batch.audio, batch.text);
  for (double& v : sim.scores.flat()) v *= sim.scale;
  return sim;
}

/// Symmetric contrastive loss, mean-reduced over the batch.
/// Audio side treats row i's diagonal as the positive against the whole row;
/// text side does the same over column i.
inline std::pair<double, double> info_nce(const SimilarityMatrix& sim) {
  const Matrix& s = sim.scores;
  std::size_t n = s.rows();
  if (n != s.cols()) throw InvalidArgument("similarity matrix not square");
  if (n < 2) throw InvalidArgument("batch too small for contrastive loss");

  double loss_audio = 0.0;
  double loss_text = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss_audio += detail::softmax_loss(
        n, [&](std::size_t j) { return s(i, j); }, s(i, i));
    loss_text += detail::softmax_loss(
        n, [&](std::size_t j) { return s(j, i); }, s(i, i));
  }
  double inv = 1.0 / static_cast<double>(n);
  return {loss_audio * inv, loss_text * inv};
}

/// Top-k selection of in-batch hard negatives for every anchor. Ties break
/// toward the smaller index; the selection is discrete, so no gradient ever
/// flows through the chosen indices.
inline HardNegativeSet mine_hard_negatives(const SimilarityMatrix& sim,
                                           std::size_t k) {
  const Matrix& s = sim.scores;
  std::size_t n = s.rows();
  if (n != s.cols()) throw InvalidArgument("similarity matrix not square");
  if (k == 0) throw InvalidArgument("hard negative count must be positive");
  if (k > n - 1) throw InvalidArgument("not enough negatives");

  HardNegativeSet negs;
  negs.text_negatives.resize(n);
  negs.audio_negatives.resize(n);

  std::vector<std::pair<double, std::size_t>> candidates;
  candidates.reserve(n - 1);
  auto top_k = [&](auto&& score_of, std::vector<std::size_t>& out,
                   std::size_t anchor) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != anchor) candidates.emplace_back(score_of(j), j);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
              });
    out.resize(k);
    for (std::size_t r = 0; r < k; ++r) out[r] = candidates[r].second;
  };

  for (std::size_t i = 0; i < n; ++i) {
    top_k([&](std::size_t j) { return s(i, j); }, negs.text_negatives[i], i);
    top_k([&](std::size_t j) { return s(j, i); }, negs.audio_negatives[i], i);
  }
  return negs;
}

inline void validate_negatives(const SimilarityMatrix& sim,
                               const HardNegativeSet& negs) {
  std::size_t n = sim.scores.rows();
  if (negs.text_negatives.size() != n || negs.audio_negatives.size() != n)
    throw InvalidArgument("negative set does not match batch size");
  auto check = [&](const std::vector<std::vector<std::size_t>>& lists) {
    for (std::size_t i = 0; i < n; ++i) {
      if (lists[i].empty() || lists[i].size() > n - 1)
        throw InvalidArgument("negative list has invalid size");
      for (std::size_t idx : lists[i]) {
        if (idx >= n || idx == i)
          throw InvalidArgument("negative index out of range or equal to anchor");
      }
    }
  };
  check(negs.text_negatives);
  check(negs.audio_negatives);
}

/// Matching loss: softmax restricted to the positive plus the mined
/// negatives, mean-reduced over the batch.
inline std::pair<double, double> lam_loss(const SimilarityMatrix& sim,
                                          const HardNegativeSet& negs) {
  validate_negatives(sim, negs);
  const Matrix& s = sim.scores;
  std::size_t n = s.rows();

  double loss_audio = 0.0;
  double loss_text = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tn = negs.text_negatives[i];
    loss_audio += detail::softmax_loss(
        tn.size() + 1,
        [&](std::size_t j) { return j == 0 ? s(i, i) : s(i, tn[j - 1]); },
        s(i, i));
    const auto& an = negs.audio_negatives[i];
    loss_text += detail::softmax_loss(
        an.size() + 1,
        [&](std::size_t j) { return j == 0 ? s(i, i) : s(an[j - 1], i); },
        s(i, i));
  }
  double inv = 1.0 / static_cast<double>(n);
  return {loss_audio * inv, loss_text * inv};
}

/// total = lambda * (audio_nce + text_nce) + gamma * (audio_match + text_match)
inline LossBreakdown total_loss(double audio_nce, double text_nce,
                                double audio_match, double text_match,
                                double lambda_weight, double gamma_weight) {
  if (lambda_weight < 0.0 || gamma_weight < 0.0)
    throw InvalidArgument("loss weights must be non-negative");
  for (double v : {audio_nce, text_nce, audio_match, text_match}) {
    if (!std::isfinite(v)) throw NumericalError("non-finite loss component");
    if (v < 0.0) throw InvalidArgument("loss components must be non-negative");
  }
  LossBreakdown out;
  out.audio_nce = audio_nce;
  out.text_nce = text_nce;
  out.audio_match = audio_match;
  out.text_match = text_match;
  out.lambda_weight = lambda_weight;
  out.gamma_weight = gamma_weight;
  out.total = lambda_weight * (audio_nce + text_nce) +
              gamma_weight * (audio_match + text_match);
  return out;
}

/// Forward-only convenience: the full objective on one batch.
inline LossBreakdown dsclap_loss(const EmbeddingBatch& batch, double log_scale,
                                 double lambda_weight, double gamma_weight,
                                 std::size_t k) {
  SimilarityMatrix sim = similarity_matrix(batch, log_scale);
  auto [la, lt] = info_nce(sim);
  HardNegativeSet negs = mine_hard_negatives(sim, k);
  auto [lam_a, lam_t] = lam_loss(sim, negs);
  return total_loss(la, lt, lam_a, lam_t, lambda_weight, gamma_weight);
}

// ============================================================================
// Backward
// ============================================================================

/// d(audio_nce)/dS and d(text_nce)/dS. Row softmax minus the diagonal
/// indicator for audio anchors; column softmax for text anchors.
inline PairGrads info_nce_backward(const SimilarityMatrix& sim) {
  const Matrix& s = sim.scores;
  std::size_t n = s.rows();
  if (n != s.cols()) throw InvalidArgument("similarity matrix not square");
  if (n < 2) throw InvalidArgument("batch too small for contrastive loss");

  PairGrads grads{Matrix(n, n), Matrix(n, n)};
  double inv = 1.0 / static_cast<double>(n);
  std::vector<double> probs(n);

  for (std::size_t i = 0; i < n; ++i) {
    double lse = detail::log_sum_exp(n, [&](std::size_t j) { return s(i, j); });
    for (std::size_t j = 0; j < n; ++j) probs[j] = std::exp(s(i, j) - lse);
    for (std::size_t j = 0; j < n; ++j)
      grads.audio(i, j) = inv * (probs[j] - (i == j ? 1.0 : 0.0));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double lse = detail::log_sum_exp(n, [&](std::size_t j) { return s(j, i); });
    for (std::size_t j = 0; j < n; ++j) probs[j] = std::exp(s(j, i) - lse);
    for (std::size_t j = 0; j < n; ++j)
      grads.text(j, i) += inv * (probs[j] - (i == j ? 1.0 : 0.0));
  }
  return grads;
}

/// d(audio_match)/dS and d(text_match)/dS with the mined indices held fixed.
inline PairGrads lam_backward(const SimilarityMatrix& sim,
                              const HardNegativeSet& negs) {
  validate_negatives(sim, negs);
  const Matrix& s = sim.scores;
  std::size_t n = s.rows();

  PairGrads grads{Matrix(n, n), Matrix(n, n)};
  double inv = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& tn = negs.text_negatives[i];
    double lse = detail::log_sum_exp(tn.size() + 1, [&](std::size_t j) {
      return j == 0 ? s(i, i) : s(i, tn[j - 1]);
    });
    grads.audio(i, i) += inv * (std::exp(s(i, i) - lse) - 1.0);
    for (std::size_t idx : tn)
      grads.audio(i, idx) += inv * std::exp(s(i, idx) - lse);

    const auto& an = negs.audio_negatives[i];
    lse = detail::log_sum_exp(an.size() + 1, [&](std::size_t j) {
      return j == 0 ? s(i, i) : s(an[j - 1], i);
    });
    grads.text(i, i) += inv * (std::exp(s(i, i) - lse) - 1.0);
    for (std::size_t idx : an)
      grads.text(idx, i) += inv * std::exp(s(idx, i) - lse);
  }
  return grads;
}

struct LossWithGradients {
  LossBreakdown breakdown;
  HardNegativeSet negatives;
  LossGradients grads;
};

/// Exact analytical gradients of the combined objective w.r.t. every entry
/// of the embedding batch and w.r.t. the log-inverse-temperature.
inline LossWithGradients loss_backward(const EmbeddingBatch& batch,
                                       double log_scale, double lambda_weight,
                                       double gamma_weight, std::size_t k) {
  SimilarityMatrix sim = similarity_matrix(batch, log_scale);
  auto [la, lt] = info_nce(sim);
  HardNegativeSet negs = mine_hard_negatives(sim, k);
  auto [lam_a, lam_t] = lam_loss(sim, negs);

  LossWithGradients out;
  out.breakdown = total_loss(la, lt, lam_a, lam_t, lambda_weight, gamma_weight);
  out.negatives = std::move(negs);

  std::size_t n = sim.scores.rows();
  Matrix dtotal_dscores(n, n);
  if (lambda_weight != 0.0) {
    PairGrads nce = info_nce_backward(sim);
    for (std::size_t i = 0; i < n * n; ++i)
      dtotal_dscores.flat()[i] +=
          lambda_weight * (nce.audio.flat()[i] + nce.text.flat()[i]);
  }
  if (gamma_weight != 0.0) {
    PairGrads lam = lam_backward(sim, out.negatives);
    for (std::size_t i = 0; i < n * n; ++i)
      dtotal_dscores.flat()[i] +=
          gamma_weight * (lam.audio.flat()[i] + lam.text.flat()[i]);
  }

  // scores = exp(log_scale) * <a_i, t_j>, so d(scores_ij)/d(log_scale) is
  // scores_ij itself and the chain into the embeddings carries the scale.
  double dscale = 0.0;
  for (std::size_t i = 0; i < n * n; ++i)
    dscale += dtotal_dscores.flat()[i] * sim.scores.flat()[i];

  out.grads.logit_scale = dscale;
  out.grads.audio = multiply(dtotal_dscores, batch.text);
  for (double& v : out.grads.audio.flat()) v *= sim.scale;
  out.grads.text = multiply(transposed(dtotal_dscores), batch.audio);
  for (double& v : out.grads.text.flat()) v *= sim.scale;
  return out;
}

}  // namespace dsclap

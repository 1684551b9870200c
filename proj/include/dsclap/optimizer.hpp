#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "dsclap/errors.hpp"
#include "dsclap/matrix.hpp"
#include "dsclap/model.hpp"

namespace dsclap {

struct AdamWOptions {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct MomentPair {
  Vec m;
  Vec v;

  bool operator==(const MomentPair&) const = default;
};

/// First/second moment slots keyed by tensor name, created lazily on the
/// first step that touches the tensor. One shared step counter.
struct OptimizerState {
  std::map<std::string, MomentPair> slots;
  std::uint64_t step = 0;

  bool operator==(const OptimizerState&) const = default;
};

namespace detail {

inline bool always_trainable(const std::string&) { return true; }

}  // namespace detail

/// Decoupled-weight-decay update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
/// Tensors rejected by `trainable` are skipped entirely (no moment update,
/// no decay), so frozen parameters stay bit-identical.
template <class TrainablePred = bool (*)(const std::string&)>
inline void adamw_step(Model& model, ModelGrads& grads, OptimizerState& state,
                       const AdamWOptions& opt,
                       TrainablePred trainable = detail::always_trainable) {
  if (opt.learning_rate <= 0.0) throw InvalidArgument("learning rate must be positive");
  if (opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 || opt.beta2 >= 1.0)
    throw InvalidArgument("beta out of range");
  if (opt.epsilon <= 0.0) throw InvalidArgument("epsilon must be positive");
  if (opt.weight_decay < 0.0) throw InvalidArgument("weight decay must be non-negative");

  std::map<std::string, TensorRef> grad_refs;
  visit_tensors(grads, [&](const TensorRef& ref) { grad_refs[ref.name] = ref; });

  state.step += 1;
  double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));

  visit_tensors(model, [&](const TensorRef& param) {
    if (!trainable(param.name)) return;
    auto it = grad_refs.find(param.name);
    if (it == grad_refs.end() || it->second.size != param.size)
      throw InvalidArgument("gradient shape mismatch: " + param.name);
    const TensorRef& grad = it->second;

    MomentPair& slot = state.slots[param.name];
    if (slot.m.empty()) {
      slot.m.assign(param.size, 0.0);
      slot.v.assign(param.size, 0.0);
    } else if (slot.m.size() != param.size) {
      throw InvalidArgument("optimizer slot shape mismatch: " + param.name);
    }

    for (std::size_t i = 0; i < param.size; ++i) {
      double g = grad.data[i];
      if (!std::isfinite(g))
        throw NumericalError("non-finite gradient: " + param.name);
      slot.m[i] = opt.beta1 * slot.m[i] + (1.0 - opt.beta1) * g;
      slot.v[i] = opt.beta2 * slot.v[i] + (1.0 - opt.beta2) * g * g;
      double m_hat = slot.m[i] / bc1;
      double v_hat = slot.v[i] / bc2;
      param.data[i] -= opt.learning_rate *
                       (m_hat / (std::sqrt(v_hat) + opt.epsilon) +
                        opt.weight_decay * param.data[i]);
    }
  });
}

}  // namespace dsclap

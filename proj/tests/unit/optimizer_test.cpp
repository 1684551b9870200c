#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "dsclap/encoders.hpp"
#include "dsclap/errors.hpp"
#include "dsclap/model.hpp"
#include "dsclap/optimizer.hpp"
#include "support/oracles.hpp"

using namespace dsclap;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.embed_dim = 4;
  cfg.proj_dim = 3;
  cfg.vocab_size = 8;
  cfg.frame_window = 4;
  cfg.frame_stride = 2;
  return cfg;
}

Model tiny_model(std::uint64_t seed) {
  Model m;
  m.encoder = init_encoder_params(tiny_config(), seed);
  return m;
}

/// Fills every gradient tensor from a deterministic stream.
ModelGrads dense_grads(const Model& m, std::uint64_t seed) {
  ModelGrads g = zeros_like(m);
  Rng rng(seed);
  visit_tensors(g, [&](const TensorRef& t) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = rng.gaussian();
  });
  return g;
}

}  // namespace

TEST_CASE("adamw_step") {
  SECTION("zero gradients and zero decay leave parameters fixed") {
    Model m = tiny_model(1);
    Model before = m;
    ModelGrads g = zeros_like(m);
    OptimizerState state;
    AdamWOptions opt;
    opt.weight_decay = 0.0;
    for (int i = 0; i < 3; ++i) adamw_step(m, g, state, opt);
    REQUIRE(m == before);
    REQUIRE(state.step == 3);
  }

  SECTION("matches the scalar recurrence for three constant-gradient steps") {
    Model m = tiny_model(2);
    AdamWOptions opt;
    opt.learning_rate = 0.1;
    opt.weight_decay = 0.004;

    oracle::ScalarAdamW ref;
    double expected = m.encoder.logit_scale;
    OptimizerState state;
    for (int step = 0; step < 3; ++step) {
      ModelGrads g = zeros_like(m);
      g.encoder.logit_scale = 0.37;
      adamw_step(m, g, state, opt);
      expected = ref.step(expected, 0.37, opt.learning_rate, opt.beta1,
                          opt.beta2, opt.epsilon, opt.weight_decay);
      REQUIRE_THAT(m.encoder.logit_scale,
                   Catch::Matchers::WithinRel(expected, 1e-12));
    }
  }

  SECTION("decay alone shrinks every parameter by 1 - lr*wd per step") {
    Model m = tiny_model(3);
    Model before = m;
    ModelGrads g = zeros_like(m);
    OptimizerState state;
    AdamWOptions opt;
    opt.learning_rate = 0.5;
    opt.weight_decay = 0.08;
    adamw_step(m, g, state, opt);

    double factor = 1.0 - opt.learning_rate * opt.weight_decay;
    std::vector<std::pair<const double*, const double*>> pairs;
    std::vector<TensorRef> now, old;
    visit_tensors(m, [&](const TensorRef& t) { now.push_back(t); });
    visit_tensors(before, [&](const TensorRef& t) { old.push_back(t); });
    REQUIRE(now.size() == old.size());
    for (std::size_t t = 0; t < now.size(); ++t)
      for (std::size_t i = 0; i < now[t].size; ++i)
        REQUIRE_THAT(now[t].data[i],
                     Catch::Matchers::WithinRel(old[t].data[i] * factor, 1e-12));
  }

  SECTION("every element follows the scalar oracle independently") {
    Model m = tiny_model(4);
    Model initial = m;
    AdamWOptions opt;
    opt.learning_rate = 0.02;
    opt.weight_decay = 0.01;

    OptimizerState state;
    std::vector<ModelGrads> history;
    for (int step = 0; step < 4; ++step) {
      history.push_back(dense_grads(m, 100 + step));
      adamw_step(m, history.back(), state, opt);
    }

    std::vector<TensorRef> final_refs, init_refs;
    visit_tensors(m, [&](const TensorRef& t) { final_refs.push_back(t); });
    visit_tensors(initial, [&](const TensorRef& t) { init_refs.push_back(t); });
    std::vector<std::vector<TensorRef>> grad_refs(history.size());
    for (std::size_t s = 0; s < history.size(); ++s)
      visit_tensors(history[s],
                    [&](const TensorRef& t) { grad_refs[s].push_back(t); });

    for (std::size_t t = 0; t < final_refs.size(); ++t) {
      for (std::size_t i = 0; i < final_refs[t].size; ++i) {
        oracle::ScalarAdamW ref;
        double expected = init_refs[t].data[i];
        for (std::size_t s = 0; s < history.size(); ++s)
          expected = ref.step(expected, grad_refs[s][t].data[i],
                              opt.learning_rate, opt.beta1, opt.beta2,
                              opt.epsilon, opt.weight_decay);
        REQUIRE_THAT(final_refs[t].data[i],
                     Catch::Matchers::WithinRel(expected, 1e-12));
      }
    }
  }

  SECTION("non-finite gradients name the offending parameter") {
    Model m = tiny_model(5);
    ModelGrads g = zeros_like(m);
    g.encoder.token_embedding(1, 2) = std::numeric_limits<double>::infinity();
    OptimizerState state;
    REQUIRE_THROWS_WITH(
        adamw_step(m, g, state, AdamWOptions{}),
        Catch::Matchers::ContainsSubstring("text_encoder.embedding"));
    REQUIRE_THROWS_AS(adamw_step(m, g, state, AdamWOptions{}), NumericalError);
  }

  SECTION("tensors outside the trainable predicate never move") {
    Model m = tiny_model(6);
    Model before = m;
    AdamWOptions opt;
    opt.learning_rate = 0.1;
    opt.weight_decay = 0.05;  // decay must not leak onto frozen tensors

    auto head_only = [](const std::string& name) {
      return name.rfind("audio_projection.", 0) == 0;
    };
    OptimizerState state;
    for (int step = 0; step < 3; ++step) {
      ModelGrads g = dense_grads(m, 200 + step);
      adamw_step(m, g, state, opt, head_only);
    }

    REQUIRE_FALSE(m.encoder.audio_projection.weight ==
                  before.encoder.audio_projection.weight);
    REQUIRE(m.encoder.audio_weight == before.encoder.audio_weight);
    REQUIRE(m.encoder.audio_bias == before.encoder.audio_bias);
    REQUIRE(m.encoder.token_embedding == before.encoder.token_embedding);
    REQUIRE(m.encoder.text_projection.weight ==
            before.encoder.text_projection.weight);
    REQUIRE(m.encoder.logit_scale == before.encoder.logit_scale);

    // Frozen tensors also hold no optimizer slots.
    for (const auto& [name, moments] : state.slots)
      REQUIRE(head_only(name));
  }

  SECTION("hyperparameters are validated") {
    Model m = tiny_model(7);
    ModelGrads g = zeros_like(m);
    OptimizerState state;
    AdamWOptions opt;

    opt.learning_rate = -1.0;
    REQUIRE_THROWS_AS(adamw_step(m, g, state, opt), InvalidArgument);
    opt = {};
    opt.beta1 = 1.0;
    REQUIRE_THROWS_AS(adamw_step(m, g, state, opt), InvalidArgument);
    opt = {};
    opt.beta2 = -0.1;
    REQUIRE_THROWS_AS(adamw_step(m, g, state, opt), InvalidArgument);
    opt = {};
    opt.epsilon = 0.0;
    REQUIRE_THROWS_AS(adamw_step(m, g, state, opt), InvalidArgument);
    opt = {};
    opt.weight_decay = -0.01;
    REQUIRE_THROWS_AS(adamw_step(m, g, state, opt), InvalidArgument);
  }
}

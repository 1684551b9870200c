// End-to-end tour: synthesize a paired corpus, pretrain the dual encoder,
// inspect retrieval alignment, then fine-tune a binary screening head.
#include <cstdio>

#include "dsclap/dsclap.hpp"

using namespace dsclap;

int main() {
  GeneratorConfig gen;
  gen.labeled = true;
  gen.noise_level = 0.5;
  gen.token_variation = 0.5;
  gen.audio_len_base = 400;
  gen.audio_len_jitter = 40;

  std::printf("generating 480 text-audio pairs across 8 tone families...\n");
  std::vector<PairedSample> pool = generate_pairs(7, 480, 8, 3, gen);
  for (PairedSample& s : pool) *s.label %= 2;  // screening target: family parity
  auto [train, valid, test] = split_dataset(pool, {352, 64, 64}, 7);

  TrainConfig cfg = TrainConfig::desk_scale();
  cfg.seed = 7;

  std::printf("pretraining (%zu epochs, batch %zu)...\n", cfg.epochs,
              cfg.batch_size);
  PretrainResult result = pretrain(cfg, train);
  const LossLogRecord& last = result.log.back();
  std::printf("  final step: total=%.4f nce=(%.4f, %.4f) match=(%.4f, %.4f)\n",
              last.total, last.audio_nce, last.text_nce, last.audio_match,
              last.text_match);

  Model fresh;
  fresh.encoder = init_encoder_params(cfg.model, derive_seed(cfg.seed, "init"));
  AlignmentReport before = evaluate_alignment(fresh, valid, cfg.batch_size);
  AlignmentReport after =
      evaluate_alignment(result.checkpoint.model, valid, cfg.batch_size);
  std::printf("alignment on held-out pairs (batch %zu):\n", cfg.batch_size);
  std::printf("  random init : nce=%.4f top1=%.3f\n", before.mean_info_nce,
              before.retrieval_top1);
  std::printf("  pretrained  : nce=%.4f top1=%.3f\n", after.mean_info_nce,
              after.retrieval_top1);

  TrainConfig probe = cfg;
  probe.epochs = 8;
  std::printf("fine-tuning a frozen-encoder screening head (%zu epochs)...\n",
              probe.epochs);
  Model tuned = finetune(result.checkpoint, Task::mdsd,
                         FreezeMask{false, false}, train, probe, 7);
  Metrics metrics = evaluate(tuned, test, Task::mdsd);
  std::printf("  test accuracy: %.3f\n", metrics.accuracy);
  if (metrics.frr)
    std::printf("  false rejection rate: %.3f\n", *metrics.frr);
  return 0;
}

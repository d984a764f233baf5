#pragma once

// Denoiser training on embedded seed addresses.
//
// The objective is the noise-prediction error plus a weighted rounding term.
// The rounding term is the squared error between the x0 estimate recovered
// from the predicted noise and the clean token embeddings.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "sixdiff/denoiser.hpp"
#include "sixdiff/noise_schedule.hpp"
#include "sixdiff/seed_corpus.hpp"

namespace sixdiff {

struct TrainConfig {
  int batch_size = 512;
  double learning_rate = 1e-3;
  int steps = 1000;
  std::uint64_t rng_seed = 1;
  double rounding_weight = 1.0;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 0.0;
  bool freeze_embeddings = false;
  /// Emit an intermediate checkpoint every N steps; 0 = final only.
  int checkpoint_every = 0;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Throws InvalidConfig.
  void validate() const;
};

struct LossBreakdown {
  double noise_mse = 0.0;
  double rounding_loss = 0.0;
  double total = 0.0;
};

/// Per-batch randomness, drawn up front so a loss evaluation is a pure
/// function of (parameters, tokens, draw).
struct NoiseDraw {
  std::vector<int> steps;  // one per sequence, uniform in [1, T]
  Matrix noise;            // epsilon for the sampled steps
};

NoiseDraw draw_noise(int sequences, const ModelConfig& config, const NoiseSchedule& schedule, std::mt19937_64& rng);

/// Evaluates the loss on `tokens` (sequences * seq_len values). When `grads`
/// is set, gradients of the total are accumulated into it. Dropout is active
/// only when `dropout_rng` is set.
LossBreakdown evaluate_loss(const DenoiserModel& model, std::span<const std::uint8_t> tokens, const NoiseDraw& draw,
                            const NoiseSchedule& schedule, double rounding_weight, DenoiserParameters* grads,
                            std::mt19937_64* dropout_rng = nullptr);

class AdamOptimizer {
 public:
  AdamOptimizer(const DenoiserParameters& like, double learning_rate, double beta1, double beta2, double epsilon);

  void step(DenoiserParameters& params, const DenoiserParameters& grads);
  long iterations() const { return iterations_; }

 private:
  DenoiserParameters first_moment_;
  DenoiserParameters second_moment_;
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long iterations_ = 0;
};

double gradient_norm(const DenoiserParameters& grads);

/// Owns the optimizer state and random streams for one model.
class Trainer {
 public:
  Trainer(DenoiserModel& model, NoiseSchedule schedule, TrainConfig config);

  /// One update on `tokens` (sequences * seq_len values). Throws NonFiniteLoss.
  LossBreakdown training_step(std::span<const std::uint8_t> tokens);

  const TrainConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  long steps_taken() const { return optimizer_.iterations(); }

 private:
  DenoiserModel& model_;
  NoiseSchedule schedule_;
  TrainConfig config_;
  AdamOptimizer optimizer_;
  DenoiserParameters grads_;
  std::mt19937_64 noise_rng_;
  std::mt19937_64 dropout_rng_;
};

struct TrainHooks {
  /// Called after every step with the 1-based step index.
  std::function<void(int, const LossBreakdown&)> on_step;
  /// Called at the checkpoint cadence and after the final step.
  std::function<void(int, const DenoiserModel&)> on_checkpoint;
};

/// Flattens seeds into a token matrix, one 32-nybble row per address.
std::vector<std::uint8_t> tokenize(std::span<const Ipv6Address> addresses);

/// Trains `model` on `corpus` for config.steps updates. Batches cycle through
/// seeded shuffles of the corpus. Deterministic for a fixed seed.
std::vector<LossBreakdown> train(DenoiserModel& model, const NoiseSchedule& schedule, const TrainConfig& config,
                                 const SeedSet& corpus, const TrainHooks& hooks = {});

}  // namespace sixdiff

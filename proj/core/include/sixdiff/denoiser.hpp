#pragma once

// Transformer noise predictor with fused global (top-down causal) and local
// (blocked multi-scale window) self-attention.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sixdiff/tensor.hpp"

namespace sixdiff {

struct ModelConfig {
  int d_embed = 64;
  int d_ff = 512;
  int n_layers = 10;
  int n_heads_global = 2;
  int n_heads_local = 2;
  int seq_len = 32;
  int vocab = 16;
  double dropout = 0.1;
  std::vector<int> window_schedule = {2, 2, 4, 4, 8, 8, 16, 16, 32, 32};

  /// Throws InvalidConfig or InvalidWindow.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Window sizes that double every `layers_per_scale` layers starting at 2,
/// capped at seq_len.
std::vector<int> pyramid_windows(int n_layers, int seq_len, int layers_per_scale = 2);

/// Row = query position, column = key position; true = attention permitted.
class AttentionMask {
 public:
  AttentionMask(int seq_len, std::vector<std::uint8_t> allowed);

  int seq_len() const { return seq_len_; }
  bool allowed(int query, int key) const { return allowed_[static_cast<std::size_t>(query) * seq_len_ + key] != 0; }
  std::size_t permitted_pairs() const;

  bool operator==(const AttentionMask&) const = default;

 private:
  int seq_len_;
  std::vector<std::uint8_t> allowed_;
};

/// Position i attends to j iff j <= i.
AttentionMask global_mask(int seq_len);
/// Position i attends to j iff both lie in the same window-sized block.
/// Throws InvalidWindow unless window divides seq_len.
AttentionMask local_mask(int seq_len, int window);
AttentionMask full_mask(int seq_len);

struct LayerNormWeights {
  Matrix gain;  // 1 x d
  Matrix bias;  // 1 x d
};

/// Projections use the row convention y = x W + b.
struct AttentionWeights {
  Matrix query, key, value, output;                          // d x d
  Matrix query_bias, key_bias, value_bias, output_bias;      // 1 x d
};

struct EncoderLayerWeights {
  LayerNormWeights attention_norm;
  AttentionWeights global;
  AttentionWeights local;
  Matrix fusion;       // 2d x d
  Matrix fusion_bias;  // 1 x d
  LayerNormWeights ff_norm;
  Matrix ff_in;        // d x d_ff
  Matrix ff_in_bias;   // 1 x d_ff
  Matrix ff_out;       // d_ff x d
  Matrix ff_out_bias;  // 1 x d
};

struct NamedTensor {
  std::string name;
  Matrix* value;
};

struct ConstNamedTensor {
  std::string name;
  const Matrix* value;
};

struct DenoiserParameters {
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // seq_len x d
  std::vector<EncoderLayerWeights> layers;
  Matrix head;       // d x d
  Matrix head_bias;  // 1 x d

  /// Every tensor in a fixed order with a stable name.
  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;

  /// Same shapes, all zeros.
  static DenoiserParameters zeros(const ModelConfig& config);

  std::size_t scalar_count() const;
};

std::size_t expected_parameter_count(const ModelConfig& config);

/// Transformer-style sinusoid of width d: sin in the first half, cos in the second.
RowVector timestep_embedding(int step, int width);

class DenoiserModel {
 public:
  /// Validates `config` and draws initial weights from `seed`.
  DenoiserModel(ModelConfig config, std::uint64_t seed);
  DenoiserModel(ModelConfig config, DenoiserParameters params);

  const ModelConfig& config() const { return config_; }
  const DenoiserParameters& params() const { return params_; }
  DenoiserParameters& params() { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  const AttentionMask& global_attention_mask() const { return global_mask_; }
  const AttentionMask& local_attention_mask(int layer) const { return local_masks_.at(layer); }

 private:
  void build_masks();

  ModelConfig config_;
  DenoiserParameters params_;
  AttentionMask global_mask_;
  std::vector<AttentionMask> local_masks_;
};

/// x + position table + timestep sinusoid. `latent` stacks sequences of
/// seq_len rows; `steps` holds one step per sequence.
Matrix embed_input(const DenoiserModel& model, const Matrix& latent, std::span<const int> steps);

/// Token embedding lookup for a flat batch of tokens (one row per token).
Matrix embed_tokens(const DenoiserModel& model, std::span<const std::uint8_t> tokens);

/// Multi-head attention over one sequence (seq_len x d) under `mask`.
Matrix multi_head_attention(const Matrix& x, const AttentionWeights& weights, const AttentionMask& mask, int heads);

/// Global and local attention on the same input, concatenated and projected
/// back to d. Operates on one sequence.
Matrix glf_msa(const Matrix& x, const EncoderLayerWeights& layer, const AttentionMask& global,
               const AttentionMask& local, int heads_global, int heads_local);

/// glf_msa with the model's masks for `layer_index`.
Matrix glf_msa_layer(const Matrix& x, int layer_index, const DenoiserModel& model);

/// Dropout masks are drawn from `rng` when set; otherwise the pass is the
/// deterministic inference pass.
struct ForwardOptions {
  std::mt19937_64* dropout_rng = nullptr;
};

/// Inference pass: predicted noise with the same shape as x_t.
Matrix predict_noise(const DenoiserModel& model, const Matrix& x_t, std::span<const int> steps);
Matrix predict_noise(const DenoiserModel& model, const Matrix& x_t, int step);

/// Records everything backward needs. Reusable across calls.
struct ForwardTape {
  struct Norm {
    Matrix normalized;  // x-hat
    ColVector inv_std;
  };
  struct Attention {
    Matrix q, k, v, context;
    std::vector<Matrix> probs;  // softmax per (sequence, head), before dropout
    std::vector<Matrix> keep;   // dropout scale per (sequence, head); empty without dropout
  };
  struct Layer {
    Norm attention_norm;
    Matrix attention_in;  // normalized input shared by both branches
    Attention global, local;
    Matrix fused_in;      // [global | local]
    Norm ff_norm;
    Matrix ff_in;         // normalized input to the feed-forward block
    Matrix ff_pre;        // pre-activation
    Matrix ff_act;        // post-activation, post-dropout
    Matrix ff_keep;       // dropout scale; empty without dropout
  };
  int batch = 0;
  std::vector<Layer> layers;
  Matrix final_out;  // residual stream fed to the head
};

Matrix forward_with_tape(const DenoiserModel& model, const Matrix& x_t, std::span<const int> steps,
                         ForwardTape& tape, const ForwardOptions& options = {});

/// Accumulates parameter gradients into `grads` and returns d(loss)/d(x_t).
/// Position-embedding gradients are accumulated; the timestep sinusoid has none.
Matrix backward(const DenoiserModel& model, const ForwardTape& tape, const Matrix& d_output,
                DenoiserParameters& grads);

/// Nearest token embedding per row (Euclidean); ties go to the lower token.
std::vector<std::uint8_t> decode_tokens(const DenoiserModel& model, const Matrix& x0_hat);

}  // namespace sixdiff

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "sixdiff/checkpoint.hpp"
#include "sixdiff/denoiser.hpp"
#include "sixdiff/errors.hpp"
#include "test_support.hpp"

using namespace sixdiff;
using testing_support::random_matrix;

namespace {

AttentionMask all_true(int n) { return full_mask(n); }

}  // namespace

TEST(Masks, GlobalIsLowerTriangular) {
  const auto m3 = global_mask(3);
  for (int i = 0; i < 3; ++i) {
    int count = 0;
    for (int j = 0; j < 3; ++j) count += m3.allowed(i, j);
    EXPECT_EQ(count, i + 1);
  }
  const auto m = global_mask(32);
  EXPECT_EQ(m.permitted_pairs(), 528u);
  for (int j = 0; j < 32; ++j) EXPECT_EQ(m.allowed(0, j), j == 0);
}

TEST(Masks, LocalBlocksMatchBruteForce) {
  EXPECT_EQ(local_mask(32, 32), all_true(32));
  EXPECT_EQ(local_mask(32, 2).permitted_pairs(), 64u);
  for (int w : {1, 2, 4, 8, 16, 32}) {
    const auto m = local_mask(32, w);
    std::size_t count = 0;
    for (int i = 0; i < 32; ++i) {
      for (int j = 0; j < 32; ++j) {
        ASSERT_EQ(m.allowed(i, j), i / w == j / w) << w;
        count += i / w == j / w;
      }
    }
    EXPECT_EQ(m.permitted_pairs(), count);
  }
  EXPECT_THROW(local_mask(32, 5), InvalidWindow);
  EXPECT_THROW(local_mask(32, 0), InvalidWindow);
}

TEST(Masks, PyramidWindows) {
  EXPECT_EQ(pyramid_windows(10, 32), (std::vector<int>{2, 2, 4, 4, 8, 8, 16, 16, 32, 32}));
  EXPECT_EQ(ModelConfig{}.window_schedule, pyramid_windows(10, 32));
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.window_schedule.pop_back();
  EXPECT_THROW(c.validate(), InvalidWindow);
  c = ModelConfig{};
  c.window_schedule[0] = 3;
  EXPECT_THROW(c.validate(), InvalidWindow);
  c = ModelConfig{};
  c.n_heads_global = 3;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = ModelConfig{};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), InvalidConfig);
}

TEST(Parameters, CountMatchesHandCount) {
  // Default: embeddings 16*64 + 32*64; per layer 2 norms (256), two attention
  // blocks (2 * 4 * (64*64 + 64) = 33280), fusion 128*64 + 64 = 8256,
  // ff 64*512 + 512 + 512*64 + 64 = 66112; head 64*64 + 64.
  const ModelConfig full;
  EXPECT_EQ(expected_parameter_count(full), 3072u + 10u * 107904u + 4160u);
  EXPECT_EQ(DenoiserModel(full, 1).parameter_count(), 1086272u);
  // Tiny: embeddings 128 + 64; per layer 32 + 576 + 136 + 144 + 136; head 72.
  const auto tiny = testing_support::tiny_config();
  EXPECT_EQ(expected_parameter_count(tiny), 2312u);
  EXPECT_EQ(DenoiserModel(tiny, 1).parameter_count(), 2312u);
}

TEST(Embedding, TimestepSinusoid) {
  const auto e0 = timestep_embedding(0, 16);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(e0(i), 0.0);
    EXPECT_EQ(e0(8 + i), 1.0);
  }
  const auto e5 = timestep_embedding(5, 16);
  EXPECT_DOUBLE_EQ(e5(0), std::sin(5.0));
  EXPECT_DOUBLE_EQ(e5(8), std::cos(5.0));
}

TEST(Embedding, InputIsTheSumOfThreeTerms) {
  const auto cfg = testing_support::tiny_config();
  DenoiserModel model(cfg, 4);
  model.params().position_embedding.setZero();
  const Matrix zero = Matrix::Zero(2 * cfg.seq_len, cfg.d_embed);
  const std::vector<int> steps = {3, 7};
  const Matrix out = embed_input(model, zero, steps);
  ASSERT_EQ(out.rows(), 2 * cfg.seq_len);
  for (int r = 0; r < out.rows(); ++r) {
    EXPECT_TRUE(out.row(r).isApprox(timestep_embedding(steps[r / cfg.seq_len], cfg.d_embed)));
  }
  std::mt19937_64 rng(1);
  DenoiserModel fresh(cfg, 4);
  const Matrix latent = random_matrix(cfg.seq_len, cfg.d_embed, rng);
  const std::vector<int> one = {9};
  const Matrix sum = latent + fresh.params().position_embedding +
                     timestep_embedding(9, cfg.d_embed).replicate(cfg.seq_len, 1);
  EXPECT_TRUE(embed_input(fresh, latent, one).isApprox(sum));
  EXPECT_THROW(embed_input(fresh, Matrix::Zero(5, cfg.d_embed), one), ShapeMismatch);
}

TEST(Attention, UnmaskedMatchesNaiveReference) {
  std::mt19937_64 rng(21);
  const int n = 8, d = 8;
  const auto layer = testing_support::random_layer(d, 16, rng);
  const Matrix x = random_matrix(n, d, rng);
  const Matrix fast = multi_head_attention(x, layer.global, all_true(n), 2);
  const Matrix slow = testing_support::naive_attention(x, layer.global, 2);
  EXPECT_LT((fast - slow).norm() / slow.norm(), 1e-12);

  Matrix both(n, 2 * d);
  both << slow, testing_support::naive_attention(x, layer.local, 2);
  const Matrix reference = both * layer.fusion + layer.fusion_bias.replicate(n, 1);
  const Matrix fused = glf_msa(x, layer, all_true(n), local_mask(n, n), 2, 2);
  EXPECT_LT((fused - reference).norm() / reference.norm(), 1e-5);
}

TEST(Attention, GlobalBranchIsCausal) {
  std::mt19937_64 rng(22);
  const int n = 32, d = 8;
  const auto layer = testing_support::random_layer(d, 16, rng);
  const Matrix x = random_matrix(n, d, rng);
  const Matrix base = multi_head_attention(x, layer.global, global_mask(n), 2);
  for (int i = 0; i < n - 1; ++i) {
    Matrix changed = x;
    changed.bottomRows(n - i - 1) = random_matrix(n - i - 1, d, rng, 3.0);
    const Matrix out = multi_head_attention(changed, layer.global, global_mask(n), 2);
    ASSERT_TRUE(out.topRows(i + 1) == base.topRows(i + 1)) << i;
  }
}

TEST(Attention, LocalBranchIsolatesBlocks) {
  std::mt19937_64 rng(23);
  const int n = 32, d = 8, w = 8;
  const auto layer = testing_support::random_layer(d, 16, rng);
  const Matrix x = random_matrix(n, d, rng);
  const auto mask = local_mask(n, w);
  const Matrix base = multi_head_attention(x, layer.local, mask, 2);
  for (int block = 0; block < n / w; ++block) {
    Matrix changed = random_matrix(n, d, rng, 3.0);
    changed.middleRows(block * w, w) = x.middleRows(block * w, w);
    const Matrix out = multi_head_attention(changed, layer.local, mask, 2);
    ASSERT_TRUE(out.middleRows(block * w, w) == base.middleRows(block * w, w)) << block;
  }
}

TEST(Attention, ProbabilitiesAreNormalizedOverPermittedKeys) {
  const auto cfg = testing_support::desk_model_config();
  DenoiserModel model(cfg, 8);
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(2 * cfg.seq_len, cfg.d_embed, rng);
  ForwardTape tape;
  const std::vector<int> steps = {1, 100};
  forward_with_tape(model, x, steps, tape);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& gm = model.global_attention_mask();
    const auto& lm = model.local_attention_mask(l);
    for (const auto* branch : {&tape.layers[l].global, &tape.layers[l].local}) {
      const auto& mask = branch == &tape.layers[l].global ? gm : lm;
      for (const auto& p : branch->probs) {
        for (int i = 0; i < p.rows(); ++i) {
          EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
          for (int j = 0; j < p.cols(); ++j) {
            if (!mask.allowed(i, j)) ASSERT_EQ(p(i, j), 0.0);
          }
        }
      }
    }
  }
}

TEST(Denoiser, InferenceIsDeterministicAndFinite) {
  const ModelConfig full;
  DenoiserModel model(full, 3);
  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(32, 64, rng);
  for (int t : {1, 1000, 2000}) {
    const Matrix a = predict_noise(model, x, t);
    const Matrix b = predict_noise(model, x, t);
    EXPECT_EQ(a.rows(), 32);
    EXPECT_EQ(a.cols(), 64);
    EXPECT_TRUE(a.allFinite());
    EXPECT_TRUE(a == b);
  }
}

TEST(Denoiser, BatchedSequencesAreIndependent) {
  const auto cfg = testing_support::tiny_config();
  DenoiserModel model(cfg, 5);
  std::mt19937_64 rng(6);
  const Matrix a = random_matrix(cfg.seq_len, cfg.d_embed, rng);
  const Matrix b = random_matrix(cfg.seq_len, cfg.d_embed, rng);
  Matrix stacked(2 * cfg.seq_len, cfg.d_embed);
  stacked << a, b;
  const std::vector<int> steps = {4, 17};
  const Matrix both = predict_noise(model, stacked, steps);
  EXPECT_TRUE(both.topRows(cfg.seq_len).isApprox(predict_noise(model, a, 4), 1e-12));
  EXPECT_TRUE(both.bottomRows(cfg.seq_len).isApprox(predict_noise(model, b, 17), 1e-12));
}

TEST(Decode, NearestEmbeddingWithLowTokenTies) {
  const auto cfg = testing_support::tiny_config();
  DenoiserModel model(cfg, 7);
  std::vector<std::uint8_t> tokens(cfg.seq_len);
  for (int i = 0; i < cfg.seq_len; ++i) tokens[i] = static_cast<std::uint8_t>((5 * i + 3) % 16);
  const Matrix exact = embed_tokens(model, tokens);
  EXPECT_EQ(decode_tokens(model, exact), tokens);

  const Matrix& table = model.params().token_embedding;
  double min_gap = 1e300;
  for (int i = 0; i < 16; ++i) {
    for (int j = i + 1; j < 16; ++j) min_gap = std::min(min_gap, (table.row(i) - table.row(j)).norm());
  }
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix noise = random_matrix(cfg.seq_len, cfg.d_embed, rng);
    for (int r = 0; r < noise.rows(); ++r) noise.row(r) *= 0.49 * min_gap / noise.row(r).norm();
    ASSERT_EQ(decode_tokens(model, exact + noise), tokens);
  }

  Matrix tie = Matrix::Zero(1, cfg.d_embed);
  tie.row(0) = 0.5 * (table.row(9) + table.row(4));
  auto& p = model.params().token_embedding;
  // Move every other token far away so only 4 and 9 compete.
  for (int k = 0; k < 16; ++k) {
    if (k != 4 && k != 9) p.row(k).setConstant(1e3);
  }
  Matrix row_block = tie.replicate(cfg.seq_len, 1);
  for (auto v : decode_tokens(model, row_block)) EXPECT_EQ(v, 4);
}

TEST(Checkpoint, RoundTripsBitExactly) {
  auto cfg = testing_support::tiny_config();
  cfg.dropout = 0.25;
  DenoiserModel model(cfg, 11);
  std::stringstream buffer;
  write_checkpoint(buffer, model);
  const auto loaded = read_checkpoint(buffer);
  EXPECT_EQ(loaded.config(), model.config());
  const auto a = model.params().tensors();
  const auto b = loaded.params().tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(*a[i].value == *b[i].value) << a[i].name;
  }
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(cfg.seq_len, cfg.d_embed, rng);
  EXPECT_TRUE(predict_noise(model, x, 3) == predict_noise(loaded, x, 3));
}

TEST(Checkpoint, RejectsCorruptInput) {
  DenoiserModel model(testing_support::tiny_config(), 1);
  std::stringstream buffer;
  write_checkpoint(buffer, model);
  const std::string bytes = buffer.str();

  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), CheckpointError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream magic(bad_magic);
  EXPECT_THROW(read_checkpoint(magic), CheckpointError);
  std::stringstream empty;
  EXPECT_THROW(read_checkpoint(empty), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
}

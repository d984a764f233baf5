#include "sixdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

constexpr double kNormEpsilon = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

void accumulate_affine_grads(const Matrix& x, const Matrix& dy, Matrix& dw, Matrix& db) {
  dw.noalias() += x.transpose() * dy;
  db += dy.colwise().sum();
}

Matrix layer_norm(const Matrix& x, const LayerNormWeights& w, ForwardTape::Norm* cache) {
  const ColVector mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  const ColVector var = centered.array().square().rowwise().mean();
  const ColVector inv_std = (var.array() + kNormEpsilon).rsqrt();
  Matrix normalized = inv_std.asDiagonal() * centered;
  Matrix y = (normalized.array().rowwise() * w.gain.row(0).array()).matrix();
  y.rowwise() += w.bias.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormWeights& w, const ForwardTape::Norm& cache,
                           LayerNormWeights& grads) {
  const Matrix& xhat = cache.normalized;
  grads.gain += (dy.array() * xhat.array()).colwise().sum().matrix();
  grads.bias += dy.colwise().sum();
  const Matrix dxhat = (dy.array().rowwise() * w.gain.row(0).array()).matrix();
  const ColVector m1 = dxhat.rowwise().mean();
  const ColVector m2 = (dxhat.array() * xhat.array()).rowwise().mean();
  Matrix dx = dxhat;
  dx.colwise() -= m1;
  dx -= (xhat.array().colwise() * m2.array()).matrix();
  return cache.inv_std.asDiagonal() * dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Softmax over permitted keys only; forbidden entries are exactly zero.
void masked_softmax(Matrix& scores, const AttentionMask& mask) {
  const int s = mask.seq_len();
  for (int i = 0; i < s; ++i) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < s; ++j) {
      if (mask.allowed(i, j)) max_score = std::max(max_score, scores(i, j));
    }
    double total = 0.0;
    for (int j = 0; j < s; ++j) {
      if (mask.allowed(i, j)) {
        scores(i, j) = std::exp(scores(i, j) - max_score);
        total += scores(i, j);
      } else {
        scores(i, j) = 0.0;
      }
    }
    scores.row(i) /= total;
  }
}

// Batched multi-head attention. `x` stacks `batch` sequences.
Matrix attention_forward(const Matrix& x, const AttentionWeights& w, const AttentionMask& mask, int heads,
                         int batch, double dropout, std::mt19937_64* rng, ForwardTape::Attention* cache) {
  const int s = mask.seq_len();
  const int d = static_cast<int>(w.query.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool use_dropout = rng != nullptr && dropout > 0.0;

  Matrix q = affine(x, w.query, w.query_bias);
  Matrix k = affine(x, w.key, w.key_bias);
  Matrix v = affine(x, w.value, w.value_bias);
  Matrix context(x.rows(), d);

  if (cache) {
    cache->probs.resize(static_cast<std::size_t>(batch) * heads);
    cache->keep.clear();
    if (use_dropout) cache->keep.resize(static_cast<std::size_t>(batch) * heads);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix scores(s, s);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      scores.noalias() = q.block(b * s, h * dh, s, dh) * k.block(b * s, h * dh, s, dh).transpose();
      scores *= scale;
      masked_softmax(scores, mask);
      const std::size_t slot = static_cast<std::size_t>(b) * heads + h;
      if (use_dropout) {
        Matrix keep(s, s);
        const double survive = 1.0 / (1.0 - dropout);
        for (Eigen::Index i = 0; i < keep.size(); ++i) keep.data()[i] = unit(*rng) < dropout ? 0.0 : survive;
        if (cache) cache->probs[slot] = scores;
        context.block(b * s, h * dh, s, dh).noalias() =
            scores.cwiseProduct(keep) * v.block(b * s, h * dh, s, dh);
        if (cache) cache->keep[slot] = std::move(keep);
      } else {
        context.block(b * s, h * dh, s, dh).noalias() = scores * v.block(b * s, h * dh, s, dh);
        if (cache) cache->probs[slot] = scores;
      }
    }
  }
  Matrix out = affine(context, w.output, w.output_bias);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
  }
  return out;
}

// Returns d(loss)/d(x) for the attention input.
Matrix attention_backward(const Matrix& x, const Matrix& d_out, const AttentionWeights& w, int heads, int batch,
                          int s, const ForwardTape::Attention& cache, AttentionWeights& g) {
  const int d = static_cast<int>(w.query.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool has_dropout = !cache.keep.empty();

  accumulate_affine_grads(cache.context, d_out, g.output, g.output_bias);
  const Matrix d_context = d_out * w.output.transpose();

  Matrix dq(x.rows(), d);
  Matrix dk(x.rows(), d);
  Matrix dv(x.rows(), d);
  Matrix d_probs(s, s);
  Matrix d_scores(s, s);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const std::size_t slot = static_cast<std::size_t>(b) * heads + h;
      const Matrix& p = cache.probs[slot];
      const auto dc = d_context.block(b * s, h * dh, s, dh);
      const auto vb = cache.v.block(b * s, h * dh, s, dh);
      d_probs.noalias() = dc * vb.transpose();
      if (has_dropout) {
        const Matrix& keep = cache.keep[slot];
        dv.block(b * s, h * dh, s, dh).noalias() = p.cwiseProduct(keep).transpose() * dc;
        d_probs = d_probs.cwiseProduct(keep);
      } else {
        dv.block(b * s, h * dh, s, dh).noalias() = p.transpose() * dc;
      }
      const ColVector row_dot = (d_probs.array() * p.array()).rowwise().sum();
      d_scores = (p.array() * (d_probs.colwise() - row_dot).array()).matrix() * scale;
      dq.block(b * s, h * dh, s, dh).noalias() = d_scores * cache.k.block(b * s, h * dh, s, dh);
      dk.block(b * s, h * dh, s, dh).noalias() = d_scores.transpose() * cache.q.block(b * s, h * dh, s, dh);
    }
  }
  accumulate_affine_grads(x, dq, g.query, g.query_bias);
  accumulate_affine_grads(x, dk, g.key, g.key_bias);
  accumulate_affine_grads(x, dv, g.value, g.value_bias);
  Matrix dx = dq * w.query.transpose();
  dx.noalias() += dk * w.key.transpose();
  dx.noalias() += dv * w.value.transpose();
  return dx;
}

Matrix concat_columns(const Matrix& left, const Matrix& right) {
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

void check_batch_shape(const DenoiserModel& model, const Matrix& x, std::size_t sequences) {
  const auto& cfg = model.config();
  if (x.cols() != cfg.d_embed || x.rows() != static_cast<Eigen::Index>(sequences) * cfg.seq_len ||
      sequences == 0) {
    throw ShapeMismatch("expected " + std::to_string(sequences) + " sequences of " + std::to_string(cfg.seq_len) +
                        "x" + std::to_string(cfg.d_embed) + ", got " + std::to_string(x.rows()) + "x" +
                        std::to_string(x.cols()));
  }
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

AttentionWeights init_attention(int d, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionWeights w;
  w.query = uniform_matrix(d, d, bound, rng);
  w.key = uniform_matrix(d, d, bound, rng);
  w.value = uniform_matrix(d, d, bound, rng);
  w.output = uniform_matrix(d, d, bound, rng);
  w.query_bias = Matrix::Zero(1, d);
  w.key_bias = Matrix::Zero(1, d);
  w.value_bias = Matrix::Zero(1, d);
  w.output_bias = Matrix::Zero(1, d);
  return w;
}

LayerNormWeights init_norm(int d) { return {Matrix::Ones(1, d), Matrix::Zero(1, d)}; }

void append_attention(std::vector<NamedTensor>& out, const std::string& prefix, AttentionWeights& w) {
  out.push_back({prefix + ".query", &w.query});
  out.push_back({prefix + ".query_bias", &w.query_bias});
  out.push_back({prefix + ".key", &w.key});
  out.push_back({prefix + ".key_bias", &w.key_bias});
  out.push_back({prefix + ".value", &w.value});
  out.push_back({prefix + ".value_bias", &w.value_bias});
  out.push_back({prefix + ".output", &w.output});
  out.push_back({prefix + ".output_bias", &w.output_bias});
}

}  // namespace

void ModelConfig::validate() const {
  if (d_embed < 2 || d_embed % 2 != 0) throw InvalidConfig("d_embed must be even and >= 2");
  if (d_ff < 1) throw InvalidConfig("d_ff must be positive");
  if (n_layers < 1) throw InvalidConfig("n_layers must be positive");
  if (seq_len < 1) throw InvalidConfig("seq_len must be positive");
  if (vocab < 2) throw InvalidConfig("vocab must be at least 2");
  if (n_heads_global < 1 || d_embed % n_heads_global != 0) {
    throw InvalidConfig("d_embed must be divisible by n_heads_global");
  }
  if (n_heads_local < 1 || d_embed % n_heads_local != 0) {
    throw InvalidConfig("d_embed must be divisible by n_heads_local");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidConfig("dropout must lie in [0, 1)");
  if (static_cast<int>(window_schedule.size()) != n_layers) {
    throw InvalidWindow("window schedule has " + std::to_string(window_schedule.size()) + " entries for " +
                        std::to_string(n_layers) + " layers");
  }
  for (int w : window_schedule) {
    if (w < 1 || seq_len % w != 0) {
      throw InvalidWindow("window " + std::to_string(w) + " does not divide seq_len " + std::to_string(seq_len));
    }
  }
}

std::vector<int> pyramid_windows(int n_layers, int seq_len, int layers_per_scale) {
  std::vector<int> windows;
  windows.reserve(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    const int exponent = 1 + l / std::max(1, layers_per_scale);
    windows.push_back(std::min(seq_len, 1 << std::min(exponent, 30)));
  }
  return windows;
}

AttentionMask::AttentionMask(int seq_len, std::vector<std::uint8_t> allowed)
    : seq_len_(seq_len), allowed_(std::move(allowed)) {
  if (seq_len < 1 || allowed_.size() != static_cast<std::size_t>(seq_len) * seq_len) {
    throw ShapeMismatch("mask size does not match seq_len " + std::to_string(seq_len));
  }
  for (int i = 0; i < seq_len_; ++i) {
    bool any = false;
    for (int j = 0; j < seq_len_ && !any; ++j) any = this->allowed(i, j);
    if (!any) throw InvalidConfig("attention mask row " + std::to_string(i) + " permits nothing");
  }
}

std::size_t AttentionMask::permitted_pairs() const {
  return static_cast<std::size_t>(std::count(allowed_.begin(), allowed_.end(), std::uint8_t{1}));
}

AttentionMask global_mask(int seq_len) {
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(seq_len) * seq_len, 0);
  for (int i = 0; i < seq_len; ++i) {
    for (int j = 0; j <= i; ++j) allowed[static_cast<std::size_t>(i) * seq_len + j] = 1;
  }
  return AttentionMask(seq_len, std::move(allowed));
}

AttentionMask local_mask(int seq_len, int window) {
  if (window < 1 || seq_len % window != 0) {
    throw InvalidWindow("window " + std::to_string(window) + " does not divide seq_len " + std::to_string(seq_len));
  }
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(seq_len) * seq_len, 0);
  for (int i = 0; i < seq_len; ++i) {
    const int block_start = (i / window) * window;
    for (int j = block_start; j < block_start + window; ++j) allowed[static_cast<std::size_t>(i) * seq_len + j] = 1;
  }
  return AttentionMask(seq_len, std::move(allowed));
}

AttentionMask full_mask(int seq_len) {
  return AttentionMask(seq_len, std::vector<std::uint8_t>(static_cast<std::size_t>(seq_len) * seq_len, 1));
}

std::vector<NamedTensor> DenoiserParameters::tensors() {
  std::vector<NamedTensor> out;
  out.push_back({"token_embedding", &token_embedding});
  out.push_back({"position_embedding", &position_embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l);
    auto& L = layers[l];
    out.push_back({p + ".attention_norm.gain", &L.attention_norm.gain});
    out.push_back({p + ".attention_norm.bias", &L.attention_norm.bias});
    append_attention(out, p + ".global", L.global);
    append_attention(out, p + ".local", L.local);
    out.push_back({p + ".fusion", &L.fusion});
    out.push_back({p + ".fusion_bias", &L.fusion_bias});
    out.push_back({p + ".ff_norm.gain", &L.ff_norm.gain});
    out.push_back({p + ".ff_norm.bias", &L.ff_norm.bias});
    out.push_back({p + ".ff_in", &L.ff_in});
    out.push_back({p + ".ff_in_bias", &L.ff_in_bias});
    out.push_back({p + ".ff_out", &L.ff_out});
    out.push_back({p + ".ff_out_bias", &L.ff_out_bias});
  }
  out.push_back({"head", &head});
  out.push_back({"head_bias", &head_bias});
  return out;
}

std::vector<ConstNamedTensor> DenoiserParameters::tensors() const {
  auto mutable_view = const_cast<DenoiserParameters*>(this)->tensors();
  std::vector<ConstNamedTensor> out;
  out.reserve(mutable_view.size());
  for (auto& t : mutable_view) out.push_back({std::move(t.name), t.value});
  return out;
}

DenoiserParameters DenoiserParameters::zeros(const ModelConfig& c) {
  const int d = c.d_embed;
  auto zero_attention = [d] {
    AttentionWeights w;
    w.query = w.key = w.value = w.output = Matrix::Zero(d, d);
    w.query_bias = w.key_bias = w.value_bias = w.output_bias = Matrix::Zero(1, d);
    return w;
  };
  auto zero_norm = [d] { return LayerNormWeights{Matrix::Zero(1, d), Matrix::Zero(1, d)}; };
  DenoiserParameters p;
  p.token_embedding = Matrix::Zero(c.vocab, d);
  p.position_embedding = Matrix::Zero(c.seq_len, d);
  p.layers.resize(c.n_layers);
  for (auto& L : p.layers) {
    L.attention_norm = zero_norm();
    L.global = zero_attention();
    L.local = zero_attention();
    L.fusion = Matrix::Zero(2 * d, d);
    L.fusion_bias = Matrix::Zero(1, d);
    L.ff_norm = zero_norm();
    L.ff_in = Matrix::Zero(d, c.d_ff);
    L.ff_in_bias = Matrix::Zero(1, c.d_ff);
    L.ff_out = Matrix::Zero(c.d_ff, d);
    L.ff_out_bias = Matrix::Zero(1, d);
  }
  p.head = Matrix::Zero(d, d);
  p.head_bias = Matrix::Zero(1, d);
  return p;
}

std::size_t DenoiserParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += static_cast<std::size_t>(t.value->size());
  return n;
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_embed;
  const std::size_t ff = c.d_ff;
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t per_layer = 2 * d                // attention norm
                                + 2 * attention      // global + local
                                + 2 * d * d + d      // fusion
                                + 2 * d              // ff norm
                                + d * ff + ff        // ff in
                                + ff * d + d;        // ff out
  return c.vocab * d + c.seq_len * d + c.n_layers * per_layer + d * d + d;
}

RowVector timestep_embedding(int step, int width) {
  const int half = width / 2;
  RowVector e = RowVector::Zero(width);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e(i) = std::sin(step * freq);
    e(half + i) = std::cos(step * freq);
  }
  return e;
}

DenoiserModel::DenoiserModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), global_mask_(full_mask(1)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int d = config_.d_embed;
  params_.token_embedding = Matrix(config_.vocab, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < params_.token_embedding.size(); ++i) params_.token_embedding.data()[i] = normal(rng);
  params_.position_embedding = uniform_matrix(config_.seq_len, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  params_.layers.resize(config_.n_layers);
  for (auto& L : params_.layers) {
    L.attention_norm = init_norm(d);
    L.global = init_attention(d, rng);
    L.local = init_attention(d, rng);
    L.fusion = uniform_matrix(2 * d, d, 1.0 / std::sqrt(2.0 * d), rng);
    L.fusion_bias = Matrix::Zero(1, d);
    L.ff_norm = init_norm(d);
    L.ff_in = uniform_matrix(d, config_.d_ff, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    L.ff_in_bias = Matrix::Zero(1, config_.d_ff);
    L.ff_out = uniform_matrix(config_.d_ff, d, 1.0 / std::sqrt(static_cast<double>(config_.d_ff)), rng);
    L.ff_out_bias = Matrix::Zero(1, d);
  }
  params_.head = uniform_matrix(d, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  params_.head_bias = Matrix::Zero(1, d);
  build_masks();
}

DenoiserModel::DenoiserModel(ModelConfig config, DenoiserParameters params)
    : config_(std::move(config)), params_(std::move(params)), global_mask_(full_mask(1)) {
  config_.validate();
  const auto shapes = DenoiserParameters::zeros(config_);
  const auto reference = shapes.tensors();
  const auto actual = std::as_const(params_).tensors();
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (actual[i].value->rows() != reference[i].value->rows() || actual[i].value->cols() != reference[i].value->cols()) {
      throw ShapeMismatch("parameter " + actual[i].name + " has the wrong shape");
    }
  }
  build_masks();
}

void DenoiserModel::build_masks() {
  global_mask_ = global_mask(config_.seq_len);
  local_masks_.clear();
  for (int w : config_.window_schedule) local_masks_.push_back(local_mask(config_.seq_len, w));
}

Matrix embed_input(const DenoiserModel& model, const Matrix& latent, std::span<const int> steps) {
  check_batch_shape(model, latent, steps.size());
  const auto& cfg = model.config();
  Matrix out = latent;
  for (std::size_t b = 0; b < steps.size(); ++b) {
    const RowVector t_emb = timestep_embedding(steps[b], cfg.d_embed);
    auto block = out.middleRows(static_cast<Eigen::Index>(b) * cfg.seq_len, cfg.seq_len);
    block += model.params().position_embedding;
    block.rowwise() += t_emb;
  }
  return out;
}

Matrix embed_tokens(const DenoiserModel& model, std::span<const std::uint8_t> tokens) {
  const Matrix& table = model.params().token_embedding;
  Matrix out(static_cast<Eigen::Index>(tokens.size()), table.cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= table.rows()) throw ShapeMismatch("token " + std::to_string(tokens[i]) + " outside vocabulary");
    out.row(static_cast<Eigen::Index>(i)) = table.row(tokens[i]);
  }
  return out;
}

Matrix multi_head_attention(const Matrix& x, const AttentionWeights& weights, const AttentionMask& mask, int heads) {
  if (x.rows() != mask.seq_len() || x.cols() != weights.query.rows()) {
    throw ShapeMismatch("attention input does not match mask/weights");
  }
  return attention_forward(x, weights, mask, heads, 1, 0.0, nullptr, nullptr);
}

Matrix glf_msa(const Matrix& x, const EncoderLayerWeights& layer, const AttentionMask& global,
               const AttentionMask& local, int heads_global, int heads_local) {
  const Matrix g = multi_head_attention(x, layer.global, global, heads_global);
  const Matrix l = multi_head_attention(x, layer.local, local, heads_local);
  return affine(concat_columns(g, l), layer.fusion, layer.fusion_bias);
}

Matrix glf_msa_layer(const Matrix& x, int layer_index, const DenoiserModel& model) {
  const auto& cfg = model.config();
  if (layer_index < 0 || layer_index >= cfg.n_layers) throw ShapeMismatch("layer index out of range");
  if (!x.allFinite()) throw ShapeMismatch("non-finite attention input");
  return glf_msa(x, model.params().layers[layer_index], model.global_attention_mask(),
                 model.local_attention_mask(layer_index), cfg.n_heads_global, cfg.n_heads_local);
}

namespace {

Matrix forward_impl(const DenoiserModel& model, const Matrix& x_t, std::span<const int> steps, ForwardTape* tape,
                    std::mt19937_64* rng) {
  const auto& cfg = model.config();
  const auto& P = model.params();
  const int batch = static_cast<int>(steps.size());
  const double dropout = rng ? cfg.dropout : 0.0;
  const bool ff_dropout = rng != nullptr && dropout > 0.0;

  Matrix h = embed_input(model, x_t, steps);
  if (tape) {
    tape->batch = batch;
    tape->layers.resize(cfg.n_layers);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& L = P.layers[l];
    ForwardTape::Layer* rec = tape ? &tape->layers[l] : nullptr;

    Matrix a = layer_norm(h, L.attention_norm, rec ? &rec->attention_norm : nullptr);
    const Matrix g = attention_forward(a, L.global, model.global_attention_mask(), cfg.n_heads_global, batch,
                                       dropout, rng, rec ? &rec->global : nullptr);
    const Matrix lo = attention_forward(a, L.local, model.local_attention_mask(l), cfg.n_heads_local, batch,
                                        dropout, rng, rec ? &rec->local : nullptr);
    Matrix fused_in = concat_columns(g, lo);
    h.noalias() += fused_in * L.fusion;
    h.rowwise() += L.fusion_bias.row(0);

    Matrix c = layer_norm(h, L.ff_norm, rec ? &rec->ff_norm : nullptr);
    Matrix pre = affine(c, L.ff_in, L.ff_in_bias);
    Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
    Matrix keep;
    if (ff_dropout) {
      keep.resize(act.rows(), act.cols());
      const double survive = 1.0 / (1.0 - dropout);
      for (Eigen::Index i = 0; i < keep.size(); ++i) keep.data()[i] = unit(*rng) < dropout ? 0.0 : survive;
      act = act.cwiseProduct(keep);
    }
    h.noalias() += act * L.ff_out;
    h.rowwise() += L.ff_out_bias.row(0);

    if (rec) {
      rec->attention_in = std::move(a);
      rec->fused_in = std::move(fused_in);
      rec->ff_in = std::move(c);
      rec->ff_pre = std::move(pre);
      rec->ff_act = std::move(act);
      rec->ff_keep = std::move(keep);
    }
  }

  Matrix out = affine(h, P.head, P.head_bias);
  if (tape) tape->final_out = std::move(h);
  return out;
}

}  // namespace

Matrix predict_noise(const DenoiserModel& model, const Matrix& x_t, std::span<const int> steps) {
  return forward_impl(model, x_t, steps, nullptr, nullptr);
}

Matrix predict_noise(const DenoiserModel& model, const Matrix& x_t, int step) {
  const std::size_t batch = static_cast<std::size_t>(x_t.rows() / std::max(1, model.config().seq_len));
  const std::vector<int> steps(batch, step);
  return forward_impl(model, x_t, steps, nullptr, nullptr);
}

Matrix forward_with_tape(const DenoiserModel& model, const Matrix& x_t, std::span<const int> steps,
                         ForwardTape& tape, const ForwardOptions& options) {
  return forward_impl(model, x_t, steps, &tape, options.dropout_rng);
}

Matrix backward(const DenoiserModel& model, const ForwardTape& tape, const Matrix& d_output,
                DenoiserParameters& grads) {
  const auto& cfg = model.config();
  const auto& P = model.params();
  const int s = cfg.seq_len;
  const int d = cfg.d_embed;

  accumulate_affine_grads(tape.final_out, d_output, grads.head, grads.head_bias);
  Matrix dh = d_output * P.head.transpose();

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& L = P.layers[l];
    const auto& rec = tape.layers[l];
    auto& G = grads.layers[l];

    accumulate_affine_grads(rec.ff_act, dh, G.ff_out, G.ff_out_bias);
    Matrix d_act = dh * L.ff_out.transpose();
    if (rec.ff_keep.size() > 0) d_act = d_act.cwiseProduct(rec.ff_keep);
    const Matrix d_pre = d_act.cwiseProduct(rec.ff_pre.unaryExpr([](double v) { return gelu_derivative(v); }));
    accumulate_affine_grads(rec.ff_in, d_pre, G.ff_in, G.ff_in_bias);
    dh += layer_norm_backward(d_pre * L.ff_in.transpose(), L.ff_norm, rec.ff_norm, G.ff_norm);

    accumulate_affine_grads(rec.fused_in, dh, G.fusion, G.fusion_bias);
    const Matrix d_fused = dh * L.fusion.transpose();
    Matrix da = attention_backward(rec.attention_in, d_fused.leftCols(d), L.global, cfg.n_heads_global, tape.batch,
                                   s, rec.global, G.global);
    da += attention_backward(rec.attention_in, d_fused.rightCols(d), L.local, cfg.n_heads_local, tape.batch, s,
                             rec.local, G.local);
    dh += layer_norm_backward(da, L.attention_norm, rec.attention_norm, G.attention_norm);
  }

  for (int b = 0; b < tape.batch; ++b) grads.position_embedding += dh.middleRows(b * s, s);
  return dh;
}

std::vector<std::uint8_t> decode_tokens(const DenoiserModel& model, const Matrix& x0_hat) {
  const Matrix& table = model.params().token_embedding;
  if (x0_hat.cols() != table.cols()) throw ShapeMismatch("decode input width does not match embeddings");
  std::vector<std::uint8_t> tokens(static_cast<std::size_t>(x0_hat.rows()));
  for (Eigen::Index r = 0; r < x0_hat.rows(); ++r) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index v = 0; v < table.rows(); ++v) {
      const double dist = (x0_hat.row(r) - table.row(v)).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(v);
      }
    }
    tokens[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(best);
  }
  return tokens;
}

}  // namespace sixdiff

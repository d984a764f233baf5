#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sixdiff/noise_schedule.hpp"
#include "sixdiff/trainer.hpp"

namespace testing_support {

using sixdiff::Matrix;

sixdiff::ModelConfig tiny_config() {
  sixdiff::ModelConfig cfg;
  cfg.d_embed = 8;
  cfg.d_ff = 16;
  cfg.n_layers = 2;
  cfg.n_heads_global = 2;
  cfg.n_heads_local = 2;
  cfg.seq_len = 8;
  cfg.vocab = 16;
  cfg.dropout = 0.0;
  cfg.window_schedule = {2, 4};
  return cfg;
}

sixdiff::ModelConfig desk_model_config() {
  sixdiff::ModelConfig cfg;
  cfg.d_embed = 32;
  cfg.d_ff = 128;
  cfg.n_layers = 4;
  cfg.window_schedule = {4, 8, 16, 32};
  return cfg;
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

GradientCheckResult gradient_check(std::uint64_t seed) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(seed);
  sixdiff::DenoiserModel model(cfg, seed);
  // Move every parameter off its structured initial value.
  for (auto& t : model.params().tensors()) {
    *t.value += random_matrix(static_cast<int>(t.value->rows()), static_cast<int>(t.value->cols()), rng, 0.2);
  }
  const auto schedule = sixdiff::NoiseSchedule::linear(50, 1e-4, 0.2);
  const int sequences = 2;
  std::vector<std::uint8_t> tokens(static_cast<std::size_t>(sequences) * cfg.seq_len);
  for (auto& t : tokens) t = static_cast<std::uint8_t>(rng() % 16);
  const auto draw = sixdiff::draw_noise(sequences, cfg, schedule, rng);
  const double lambda = 0.7;

  auto grads = sixdiff::DenoiserParameters::zeros(cfg);
  sixdiff::evaluate_loss(model, tokens, draw, schedule, lambda, &grads);
  auto loss_at = [&] { return sixdiff::evaluate_loss(model, tokens, draw, schedule, lambda, nullptr).total; };

  GradientCheckResult result;
  const double h = 1e-4;
  auto params = model.params().tensors();
  const auto analytic = std::as_const(grads).tensors();
  // Entries that vanish analytically (key biases under softmax) are compared
  // against a floor tied to the largest gradient rather than to zero.
  double largest = 0.0;
  for (const auto& g : analytic) largest = std::max(largest, g.value->cwiseAbs().maxCoeff());
  const double floor = 1e-6 * std::max(largest, 1.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k].value;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double original = p.data()[i];
      auto at = [&](double offset) {
        p.data()[i] = original + offset;
        return loss_at();
      };
      const double numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      p.data()[i] = original;
      const double a = analytic[k].value->data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > result.worst_relative_error) {
        result.worst_relative_error = rel;
        result.worst_tensor = params[k].name;
        result.worst_index = static_cast<long>(i);
      }
      ++result.checked;
    }
  }
  return result;
}

Matrix naive_attention(const Matrix& x, const sixdiff::AttentionWeights& w, int heads) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int dh = d / heads;
  Matrix q(n, d), k(n, d), v(n, d);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) {
      double sq = w.query_bias(0, c), sk = w.key_bias(0, c), sv = w.value_bias(0, c);
      for (int j = 0; j < d; ++j) {
        sq += x(r, j) * w.query(j, c);
        sk += x(r, j) * w.key(j, c);
        sv += x(r, j) * w.value(j, c);
      }
      q(r, c) = sq;
      k(r, c) = sk;
      v(r, c) = sv;
    }
  }
  Matrix context = Matrix::Zero(n, d);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> scores(n);
      double top = -1e300;
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, h * dh + c);
        scores[j] = s / std::sqrt(static_cast<double>(dh));
        top = std::max(top, scores[j]);
      }
      double total = 0;
      for (auto& s : scores) total += (s = std::exp(s - top));
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < dh; ++c) context(i, h * dh + c) += scores[j] / total * v(j, h * dh + c);
      }
    }
  }
  Matrix out(n, d);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) {
      double s = w.output_bias(0, c);
      for (int j = 0; j < d; ++j) s += context(r, j) * w.output(j, c);
      out(r, c) = s;
    }
  }
  return out;
}

namespace {

sixdiff::AttentionWeights random_attention(int d, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  return {random_matrix(d, d, rng, s), random_matrix(d, d, rng, s), random_matrix(d, d, rng, s),
          random_matrix(d, d, rng, s), random_matrix(1, d, rng, 0.1), random_matrix(1, d, rng, 0.1),
          random_matrix(1, d, rng, 0.1), random_matrix(1, d, rng, 0.1)};
}

sixdiff::LayerNormWeights random_norm(int d, std::mt19937_64& rng) {
  Matrix gain = Matrix::Ones(1, d) + random_matrix(1, d, rng, 0.1);
  return {gain, random_matrix(1, d, rng, 0.1)};
}

}  // namespace

sixdiff::EncoderLayerWeights random_layer(int d, int d_ff, std::mt19937_64& rng) {
  sixdiff::EncoderLayerWeights w;
  w.attention_norm = random_norm(d, rng);
  w.global = random_attention(d, rng);
  w.local = random_attention(d, rng);
  w.fusion = random_matrix(2 * d, d, rng, 1.0 / std::sqrt(2.0 * d));
  w.fusion_bias = random_matrix(1, d, rng, 0.1);
  w.ff_norm = random_norm(d, rng);
  w.ff_in = random_matrix(d, d_ff, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  w.ff_in_bias = random_matrix(1, d_ff, rng, 0.1);
  w.ff_out = random_matrix(d_ff, d, rng, 1.0 / std::sqrt(static_cast<double>(d_ff)));
  w.ff_out_bias = random_matrix(1, d, rng, 0.1);
  return w;
}

BruteMetrics brute_force_metrics(const std::vector<sixdiff::Ipv6Address>& candidates,
                                 const std::vector<sixdiff::Ipv6Address>& seeds, const std::vector<bool>& active,
                                 const std::vector<bool>& alias, const std::vector<int>& lengths) {
  const double n = static_cast<double>(candidates.size());
  const std::set<sixdiff::Ipv6Address> seed_set(seeds.begin(), seeds.end());
  std::set<sixdiff::Ipv6Address> active_set, generated_set;
  double aliased = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (active[i]) active_set.insert(candidates[i]);
    if (alias[i]) ++aliased;
  }
  std::set_difference(active_set.begin(), active_set.end(), seed_set.begin(), seed_set.end(),
                      std::inserter(generated_set, generated_set.end()));
  BruteMetrics m;
  m.hit = active_set.size() / n;
  m.gen = generated_set.size() / n;
  m.nonalias = (n - aliased) / n;
  auto prefixes = [](const auto& addrs, int len) {
    std::set<std::pair<std::uint64_t, std::uint64_t>> out;
    for (const auto& a : addrs) {
      const auto p = sixdiff::mask_address(a, len);
      out.emplace(p.high(), p.low());
    }
    return out;
  };
  for (int len : lengths) {
    const auto s = prefixes(seed_set, len);
    const auto c = prefixes(candidates, len);
    const auto g = prefixes(generated_set, len);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> cn, gn;
    std::set_difference(c.begin(), c.end(), s.begin(), s.end(), std::back_inserter(cn));
    std::set_difference(g.begin(), g.end(), s.begin(), s.end(), std::back_inserter(gn));
    m.cn_pre.push_back(cn.size() / n);
    m.gn_pre.push_back(gn.size() / n);
  }
  return m;
}

MetricInstance random_metric_instance(std::mt19937_64& rng) {
  using sixdiff::Ipv6Address;
  const int n = 1 + static_cast<int>(rng() % 500);
  std::vector<std::uint64_t> heads;
  for (int i = 0; i < 6; ++i) heads.push_back(0x2001000000000000ULL | ((rng() % 4) << 32) | (rng() % 3) << 16);
  auto draw = [&] {
    return Ipv6Address(heads[rng() % heads.size()] | (rng() % 2), (rng() % 4) << 48 | (rng() % 40));
  };
  MetricInstance in;
  std::set<Ipv6Address> used;
  while (static_cast<int>(in.candidates.size()) < n) {
    const auto a = draw();
    if (used.insert(a).second) in.candidates.push_back(a);
    if (used.size() > 2000) break;
  }
  for (int i = 0; i < 150; ++i) in.seeds.push_back(rng() % 2 ? draw() : in.candidates[rng() % in.candidates.size()]);
  for (std::size_t i = 0; i < in.candidates.size(); ++i) {
    in.alias.push_back(rng() % 7 == 0);
    in.active.push_back(!in.alias.back() && rng() % 2 == 0);
  }
  return in;
}

sixdiff::MetricCounts published_counts(std::size_t n_candidate) {
  sixdiff::MetricCounts c;
  c.n_candidate = n_candidate;
  c.n_hit = 44435;
  c.n_repeat = 44435 - 44372;
  c.n_aliased = n_candidate - 88528;
  c.prefixes = {
      {32, 4104, 3266, 310, 131},
      {48, 26081, 21605, 11286, 7988},
      {64, 90194, 89538, 43807, 43557},
      {80, 91136, 90742, 43807, 43636},
  };
  return c;
}

std::vector<PublishedValue> published_values() {
  using R = const sixdiff::MetricsReport&;
  return {
      {"non-alias rate %", 93.10, [](R r) { return 100 * r.nonalias_rate; }},
      {"hit rate %", 46.73, [](R r) { return 100 * r.hit_rate; }},
      {"generation rate %", 46.66, [](R r) { return 100 * r.generation_rate; }},
      {"/32 r_cn-pre %", 3.43, [](R r) { return 100 * r.prefixes[0].candidate.ratio; }},
      {"/32 cn per 10k", 343.45, [](R r) { return r.prefixes[0].candidate.per10k; }},
      {"/32 r_gn-pre %", 0.14, [](R r) { return 100 * r.prefixes[0].generation.ratio; }},
      {"/32 gn per 10k", 13.78, [](R r) { return r.prefixes[0].generation.per10k; }},
      {"/48 r_cn-pre %", 22.72, [](R r) { return 100 * r.prefixes[1].candidate.ratio; }},
      {"/48 cn per 10k", 2271.99, [](R r) { return r.prefixes[1].candidate.per10k; }},
      {"/48 r_gn-pre %", 8.40, [](R r) { return 100 * r.prefixes[1].generation.ratio; }},
      {"/48 gn per 10k", 840.02, [](R r) { return r.prefixes[1].generation.per10k; }},
      {"/64 r_cn-pre %", 94.16, [](R r) { return 100 * r.prefixes[2].candidate.ratio; }},
      {"/64 cn per 10k", 9415.84, [](R r) { return r.prefixes[2].candidate.per10k; }},
      {"/64 r_gn-pre %", 45.80, [](R r) { return 100 * r.prefixes[2].generation.ratio; }},
      {"/64 gn per 10k", 4580.46, [](R r) { return r.prefixes[2].generation.per10k; }},
      {"/80 r_cn-pre %", 95.42, [](R r) { return 100 * r.prefixes[3].candidate.ratio; }},
      {"/80 cn per 10k", 9542.45, [](R r) { return r.prefixes[3].candidate.per10k; }},
      {"/80 r_gn-pre %", 45.89, [](R r) { return 100 * r.prefixes[3].generation.ratio; }},
      {"/80 gn per 10k", 4588.77, [](R r) { return r.prefixes[3].generation.per10k; }},
  };
}

}  // namespace testing_support

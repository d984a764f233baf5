#pragma once

// Oracles and fixtures shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sixdiff/denoiser.hpp"
#include "sixdiff/metrics.hpp"
#include "sixdiff/synthetic_universe.hpp"

namespace testing_support {

/// d_embed 8, 2 layers, seq_len 8, d_ff 16, windows {2, 4}, no dropout.
sixdiff::ModelConfig tiny_config();

/// Desk-scale model used for the overfit and end-to-end runs.
sixdiff::ModelConfig desk_model_config();

struct GradientCheckResult {
  double worst_relative_error = 0.0;
  std::string worst_tensor;
  long worst_index = 0;
  std::size_t checked = 0;
};

/// Analytic vs. five-point central-difference gradients of the full training
/// loss for every scalar parameter of a randomly drawn tiny model.
GradientCheckResult gradient_check(std::uint64_t seed);

/// Reference multi-head attention with explicit loops and no masking.
sixdiff::Matrix naive_attention(const sixdiff::Matrix& x, const sixdiff::AttentionWeights& w, int heads);

/// Random weights for one encoder layer.
sixdiff::EncoderLayerWeights random_layer(int d, int d_ff, std::mt19937_64& rng);

sixdiff::Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0);

/// Brute-force set algebra over one instance.
struct BruteMetrics {
  double hit = 0, gen = 0, nonalias = 0;
  std::vector<double> cn_pre, gn_pre;  // per prefix length
};
BruteMetrics brute_force_metrics(const std::vector<sixdiff::Ipv6Address>& candidates,
                                 const std::vector<sixdiff::Ipv6Address>& seeds, const std::vector<bool>& active,
                                 const std::vector<bool>& alias, const std::vector<int>& lengths);

/// A random deduplicated candidate set of at most 500 addresses drawn from a
/// few shared heads, with overlapping seeds and random activity/alias flags.
struct MetricInstance {
  std::vector<sixdiff::Ipv6Address> candidates;
  std::vector<sixdiff::Ipv6Address> seeds;
  std::vector<bool> active, alias;
};
MetricInstance random_metric_instance(std::mt19937_64& rng);

/// Published raw counts behind the headline result and prefix tables.
sixdiff::MetricCounts published_counts(std::size_t n_candidate);

struct PublishedValue {
  std::string label;
  double expected;
  double (*extract)(const sixdiff::MetricsReport&);
};
std::vector<PublishedValue> published_values();

}  // namespace testing_support

#pragma once

// Candidate-set quality metrics: hit rate, generation rate, non-alias rate,
// and the candidate / generation new-prefix rates at several prefix lengths.

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "sixdiff/address.hpp"
#include "sixdiff/seed_corpus.hpp"

namespace sixdiff {

inline constexpr int kDefaultPrefixLengths[] = {32, 48, 64, 80};

/// A deduplicated candidate set with per-candidate activity and alias flags.
class EvaluationInput {
 public:
  /// Throws ShapeMismatch if the flag vectors do not align with the
  /// candidates, or InvalidConfig if candidates contain duplicates.
  EvaluationInput(std::vector<Ipv6Address> candidates, const SeedSet& seeds, std::vector<bool> active,
                  std::vector<bool> alias);
  /// The seed set is held by reference.
  EvaluationInput(std::vector<Ipv6Address>, SeedSet&&, std::vector<bool>, std::vector<bool>) = delete;

  const std::vector<Ipv6Address>& candidates() const { return candidates_; }
  const SeedSet& seeds() const { return *seeds_; }
  const std::vector<bool>& active() const { return active_; }
  const std::vector<bool>& alias() const { return alias_; }

 private:
  std::vector<Ipv6Address> candidates_;
  const SeedSet* seeds_;
  std::vector<bool> active_;
  std::vector<bool> alias_;
};

struct PrefixCounts {
  int length = 0;
  std::size_t candidate_prefixes = 0;       // |Set(C)_pre|
  std::size_t candidate_new_prefixes = 0;   // |Set(C)_pre \ Set(S)_pre|
  std::size_t generated_prefixes = 0;       // |Set(G)_pre|
  std::size_t generated_new_prefixes = 0;   // |Set(G)_pre \ Set(S)_pre|
};

/// Raw counts behind every metric. N_gen = n_hit - n_repeat.
struct MetricCounts {
  std::size_t n_candidate = 0;
  std::size_t n_hit = 0;
  std::size_t n_repeat = 0;
  std::size_t n_aliased = 0;
  std::vector<PrefixCounts> prefixes;
};

struct PrefixRate {
  std::size_t prefixes = 0;      // N_c-pre or N_g-pre
  std::size_t new_prefixes = 0;  // N_cn-pre or N_gn-pre
  double ratio = 0.0;            // new_prefixes / N_candidate
  double per10k = 0.0;           // ratio * 10000
};

struct PrefixReport {
  int length = 0;
  PrefixRate candidate;
  PrefixRate generation;
};

struct MetricsReport {
  MetricCounts counts;
  double hit_rate = 0.0;
  double generation_rate = 0.0;
  double nonalias_rate = 0.0;
  std::vector<PrefixReport> prefixes;
};

double hit_rate(const EvaluationInput& input);
double generation_rate(const EvaluationInput& input);
double nonalias_rate(const EvaluationInput& input);
PrefixRate candidate_new_prefix_rate(const EvaluationInput& input, int length);
PrefixRate generation_new_prefix_rate(const EvaluationInput& input, int length);

MetricCounts count_metrics(const EvaluationInput& input, std::span<const int> prefix_lengths = kDefaultPrefixLengths);

/// Throws EmptyCandidateSet when n_candidate is 0.
MetricsReport report_from_counts(const MetricCounts& counts);
MetricsReport full_report(const EvaluationInput& input, std::span<const int> prefix_lengths = kDefaultPrefixLengths);

/// Fixed schema: metric, prefix_length, numerator, denominator, ratio, per10k.
void write_report_tsv(std::ostream& out, const MetricsReport& report);
/// Aligned table for terminals; ratios as percentages.
void write_report_text(std::ostream& out, const MetricsReport& report);

/// key=value counts fixture:
///   n_candidate, n_hit, n_repeat or n_gen, n_aliased or n_nonaliased,
///   prefix.<L>.c_pre, prefix.<L>.cn_pre, prefix.<L>.g_pre, prefix.<L>.gn_pre
MetricCounts read_counts(std::istream& in);

}  // namespace sixdiff

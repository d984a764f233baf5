#pragma once

// Two-stage alias removal: coarse filtering against known alias prefixes, then
// a fine-grained probe of 16 random siblings sharing the candidate's /96.

#include <array>
#include <cstddef>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "sixdiff/address.hpp"
#include "sixdiff/alias_prefix_set.hpp"
#include "sixdiff/prober.hpp"

namespace sixdiff {

inline constexpr int kFineProbeCount = 16;
inline constexpr int kFineProbePrefixLength = 96;

enum class AliasStage { kCoarse, kFine };

struct AliasVerdict {
  Ipv6Address address;
  AliasStage stage = AliasStage::kCoarse;
  bool is_alias = false;
  int probes_used = 0;
};

struct CoarsePartition {
  std::vector<Ipv6Address> nonalias;
  std::vector<Ipv6Address> alias;
};

/// Stable partition by trie coverage.
CoarsePartition coarse_filter(std::span<const Ipv6Address> candidates, const AliasPrefixSet& aliases);

/// 16 addresses sharing `address`'s top `prefix_length` bits with pairwise
/// distinct random suffixes, none equal to the candidate's own suffix.
/// prefix_length must lie in [64, 123].
std::array<Ipv6Address, kFineProbeCount> fine_probe_targets(const Ipv6Address& address, std::mt19937_64& rng,
                                                            int prefix_length = kFineProbePrefixLength);

/// Alias iff all 16 probes answer.
AliasVerdict classify_fine(const Ipv6Address& address, Prober& prober, std::mt19937_64& rng,
                           int prefix_length = kFineProbePrefixLength);

struct DealiasReport {
  std::size_t input_count = 0;
  std::size_t unique_count = 0;
  std::size_t coarse_alias_count = 0;
  std::size_t fine_alias_count = 0;
  std::size_t probes_issued = 0;
  std::vector<AliasVerdict> verdicts;  // one per unique candidate, in order
};

struct DealiasResult {
  std::vector<Ipv6Address> clean;
  DealiasReport report;
};

/// Dedup, coarse filter, then fine probing of the coarse survivors. All fine
/// probes go out as one batch through `prober`.
DealiasResult dealias(std::span<const Ipv6Address> candidates, const AliasPrefixSet& aliases, Prober& prober,
                      std::mt19937_64& rng, int prefix_length = kFineProbePrefixLength);

/// "address<TAB>stage<TAB>verdict<TAB>probes" per line after a header.
void write_alias_report(std::ostream& out, const DealiasReport& report);

}  // namespace sixdiff

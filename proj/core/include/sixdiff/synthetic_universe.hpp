#pragma once

// A parametric ground-truth address space: active /64s with enumerable IID
// patterns plus /96 regions where every suffix answers.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sixdiff/address.hpp"
#include "sixdiff/prober.hpp"
#include "sixdiff/sampler.hpp"
#include "sixdiff/seed_corpus.hpp"

namespace sixdiff {

enum class PatternKind {
  kLowByte,  // IID in [1, count]
  kWords,    // 0:0:g7:g8 with g7 in [base, base + count), g8 in [1, width]
  kStride,   // base + stride * i, i in [0, count)
};

struct IidPattern {
  PatternKind kind = PatternKind::kLowByte;
  std::uint64_t base = 0;
  std::uint64_t stride = 1;
  std::uint32_t count = 0;
  std::uint32_t width = 0;

  bool matches(std::uint64_t iid) const;
  std::uint64_t size() const;
  /// Enumerates in increasing IID order.
  std::vector<std::uint64_t> enumerate() const;

  bool operator==(const IidPattern&) const = default;
};

struct UniverseConfig {
  int slash32_count = 2;
  int slash48_per_32 = 4;
  int active_prefixes = 32;
  int alias_regions = 4;
  std::uint32_t min_pattern_size = 60;
  std::uint32_t max_pattern_size = 200;

  /// Throws InvalidConfig.
  void validate() const;
};

struct ActivePrefix {
  Prefix prefix;  // always /64
  IidPattern pattern;
};

class SyntheticUniverse {
 public:
  SyntheticUniverse() = default;
  SyntheticUniverse(std::uint64_t seed, std::vector<ActivePrefix> active, std::vector<Prefix> aliases);

  std::uint64_t seed() const { return seed_; }
  const std::vector<ActivePrefix>& active_prefixes() const { return active_; }
  const std::vector<Prefix>& alias_regions() const { return aliases_; }

  bool is_active(const Ipv6Address& address) const;
  bool in_alias_region(const Ipv6Address& address) const;
  /// Pattern match on an active /64, ignoring alias regions.
  bool matches_pattern(const Ipv6Address& address) const;

  /// Every pattern address, grouped by prefix in prefix order.
  std::vector<Ipv6Address> enumerate_active() const;
  std::uint64_t active_count() const;

  bool operator==(const SyntheticUniverse& other) const {
    return seed_ == other.seed_ && aliases_ == other.aliases_ && same_active(other);
  }

 private:
  bool same_active(const SyntheticUniverse& other) const;

  std::uint64_t seed_ = 0;
  std::vector<ActivePrefix> active_;
  std::vector<Prefix> aliases_;
  std::unordered_map<std::uint64_t, std::size_t> by_high_;
  std::unordered_set<Ipv6Address> alias_heads_;
};

SyntheticUniverse build_universe(const UniverseConfig& config, std::uint64_t seed);

std::vector<bool> oracle_probe(const SyntheticUniverse& universe, std::span<const Ipv6Address> addresses);

class OracleProber : public Prober {
 public:
  explicit OracleProber(const SyntheticUniverse& universe) : universe_(universe) {}
  std::vector<bool> probe_batch(std::span<const Ipv6Address> addresses) override {
    return oracle_probe(universe_, addresses);
  }

 private:
  const SyntheticUniverse& universe_;
};

/// n distinct pattern addresses drawn uniformly. Throws InvalidConfig if the
/// universe holds fewer than n.
SeedSet sample_seeds(const SyntheticUniverse& universe, std::size_t n, std::uint64_t seed);

/// m addresses with an active /64 head and a uniformly random IID.
CandidateSet random_baseline(const SyntheticUniverse& universe, std::size_t m, std::uint64_t seed);

/// Line format:
///   seed <n>
///   active <prefix>/64 lowbyte <count>
///   active <prefix>/64 words <base> <count> <width>
///   active <prefix>/64 stride <base> <stride> <count>
///   alias <prefix>/96
void dump_universe(std::ostream& out, const SyntheticUniverse& universe);
/// Throws InvalidConfig naming the offending line.
SyntheticUniverse restore_universe(std::istream& in);

}  // namespace sixdiff

#pragma once

// Seed ingestion, prescanning, alias-prefix lists, and scanner file adapters.

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "sixdiff/address.hpp"
#include "sixdiff/alias_prefix_set.hpp"
#include "sixdiff/prober.hpp"

namespace sixdiff {

/// Ordered, duplicate-free collection of seed addresses.
class SeedSet {
 public:
  SeedSet() = default;
  /// Keeps the first occurrence of each address.
  explicit SeedSet(std::span<const Ipv6Address> addresses);

  /// Returns false if already present.
  bool add(const Ipv6Address& address);

  bool contains(const Ipv6Address& address) const { return index_.contains(address); }
  const std::vector<Ipv6Address>& addresses() const { return addresses_; }
  std::size_t size() const { return addresses_.size(); }
  bool empty() const { return addresses_.empty(); }

  bool operator==(const SeedSet& other) const { return addresses_ == other.addresses_; }

 private:
  std::vector<Ipv6Address> addresses_;
  std::unordered_set<Ipv6Address> index_;
};

struct RejectedLine {
  std::size_t line_number = 0;  // 1-based
  std::string text;
  std::string reason;
};

struct SeedLoadResult {
  SeedSet seeds;
  std::vector<RejectedLine> rejects;
  std::size_t lines_read = 0;
  std::size_t duplicates = 0;
};

/// One address per line; blank lines and '#' comments are skipped.
/// Malformed lines are reported in `rejects`. Throws EmptyCorpus when no
/// valid address was read.
SeedLoadResult load_seed_set(std::istream& source);

/// Keeps only seeds the prober reports active, preserving order. The result
/// may be empty; callers decide whether that is an error.
SeedSet prescan_seeds(const SeedSet& seeds, Prober& prober);

/// One CIDR per line ("2001:db8::/32"); blank lines and '#' comments skipped.
/// Throws MalformedPrefix naming the offending line.
AliasPrefixSet load_alias_prefixes(std::istream& source);

struct ScanResult {
  Ipv6Address address;
  bool active = false;

  bool operator==(const ScanResult&) const = default;
};

/// One canonical address per line.
void write_target_list(std::ostream& sink, std::span<const Ipv6Address> addresses);
void write_seed_set(std::ostream& sink, const SeedSet& seeds);

/// Accepts bare "address" lines (present means active) and "address,0|1"
/// lines. Throws MalformedResultLine.
std::vector<ScanResult> read_result_list(std::istream& source);

/// Reads a target/candidate list, keeping duplicates and order.
std::vector<Ipv6Address> read_address_list(std::istream& source);

}  // namespace sixdiff

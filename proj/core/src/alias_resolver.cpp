#include "sixdiff/alias_resolver.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

// Replaces the low (128 - prefix_length) bits of `base` with `suffix`.
Ipv6Address with_suffix(const Ipv6Address& base, std::uint64_t suffix, int prefix_length) {
  const Ipv6Address head = mask_address(base, prefix_length);
  return {head.high(), head.low() | suffix};
}

}  // namespace

CoarsePartition coarse_filter(std::span<const Ipv6Address> candidates, const AliasPrefixSet& aliases) {
  CoarsePartition part;
  for (const auto& a : candidates) (aliases.covers(a) ? part.alias : part.nonalias).push_back(a);
  return part;
}

std::array<Ipv6Address, kFineProbeCount> fine_probe_targets(const Ipv6Address& address, std::mt19937_64& rng,
                                                            int prefix_length) {
  if (prefix_length < 64 || prefix_length > 123) {
    throw InvalidConfig("fine probe prefix length must lie in [64, 123], got " + std::to_string(prefix_length));
  }
  const int suffix_bits = kAddressBits - prefix_length;
  const std::uint64_t suffix_mask = suffix_bits == 64 ? ~0ULL : ((1ULL << suffix_bits) - 1);
  const std::uint64_t own = address.low() & suffix_mask;

  std::array<Ipv6Address, kFineProbeCount> targets;
  std::uint64_t chosen[kFineProbeCount];
  int n = 0;
  while (n < kFineProbeCount) {
    const std::uint64_t s = rng() & suffix_mask;
    if (s == own || std::find(chosen, chosen + n, s) != chosen + n) continue;
    chosen[n] = s;
    targets[n] = with_suffix(address, s, prefix_length);
    ++n;
  }
  return targets;
}

AliasVerdict classify_fine(const Ipv6Address& address, Prober& prober, std::mt19937_64& rng, int prefix_length) {
  const auto targets = fine_probe_targets(address, rng, prefix_length);
  const auto verdicts = prober.probe_batch(targets);
  if (verdicts.size() != targets.size()) throw ProberUnavailable("prober returned a misaligned verdict list");
  AliasVerdict v;
  v.address = address;
  v.stage = AliasStage::kFine;
  v.probes_used = kFineProbeCount;
  v.is_alias = std::all_of(verdicts.begin(), verdicts.end(), [](bool b) { return b; });
  return v;
}

DealiasResult dealias(std::span<const Ipv6Address> candidates, const AliasPrefixSet& aliases, Prober& prober,
                      std::mt19937_64& rng, int prefix_length) {
  DealiasResult result;
  auto& report = result.report;
  report.input_count = candidates.size();

  std::unordered_set<Ipv6Address> seen;
  std::vector<Ipv6Address> unique;
  unique.reserve(candidates.size());
  for (const auto& a : candidates) {
    if (seen.insert(a).second) unique.push_back(a);
  }
  report.unique_count = unique.size();

  // Coarse verdicts are final; survivors get one slot each in the probe batch.
  report.verdicts.resize(unique.size());
  std::vector<std::size_t> survivors;
  std::vector<Ipv6Address> probes;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    auto& v = report.verdicts[i];
    v.address = unique[i];
    if (aliases.covers(unique[i])) {
      v.stage = AliasStage::kCoarse;
      v.is_alias = true;
      ++report.coarse_alias_count;
      continue;
    }
    survivors.push_back(i);
    const auto targets = fine_probe_targets(unique[i], rng, prefix_length);
    probes.insert(probes.end(), targets.begin(), targets.end());
  }

  std::vector<bool> answers;
  if (!probes.empty()) {
    answers = prober.probe_batch(probes);
    if (answers.size() != probes.size()) throw ProberUnavailable("prober returned a misaligned verdict list");
  }
  report.probes_issued = probes.size();

  for (std::size_t k = 0; k < survivors.size(); ++k) {
    auto& v = report.verdicts[survivors[k]];
    v.stage = AliasStage::kFine;
    v.probes_used = kFineProbeCount;
    const auto first = answers.begin() + static_cast<std::ptrdiff_t>(k * kFineProbeCount);
    v.is_alias = std::all_of(first, first + kFineProbeCount, [](bool b) { return b; });
    if (v.is_alias) {
      ++report.fine_alias_count;
    } else {
      result.clean.push_back(v.address);
    }
  }
  return result;
}

void write_alias_report(std::ostream& out, const DealiasReport& report) {
  out << "# input=" << report.input_count << " unique=" << report.unique_count
      << " coarse_alias=" << report.coarse_alias_count << " fine_alias=" << report.fine_alias_count
      << " probes=" << report.probes_issued << '\n';
  out << "address\tstage\tverdict\tprobes\n";
  for (const auto& v : report.verdicts) {
    out << format_address(v.address) << '\t' << (v.stage == AliasStage::kCoarse ? "coarse" : "fine") << '\t'
        << (v.is_alias ? "alias" : "nonalias") << '\t' << v.probes_used << '\n';
  }
}

}  // namespace sixdiff

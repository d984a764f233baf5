#include "sixdiff/seed_corpus.hpp"

#include <string_view>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool skippable(std::string_view line) { return line.empty() || line.front() == '#'; }

}  // namespace

SeedSet::SeedSet(std::span<const Ipv6Address> addresses) {
  addresses_.reserve(addresses.size());
  for (const auto& a : addresses) add(a);
}

bool SeedSet::add(const Ipv6Address& address) {
  if (!index_.insert(address).second) return false;
  addresses_.push_back(address);
  return true;
}

SeedLoadResult load_seed_set(std::istream& source) {
  SeedLoadResult result;
  std::string raw;
  while (std::getline(source, raw)) {
    ++result.lines_read;
    const std::string_view line = trim(raw);
    if (skippable(line)) continue;
    try {
      if (!result.seeds.add(parse_address(line))) ++result.duplicates;
    } catch (const MalformedAddress& e) {
      result.rejects.push_back({result.lines_read, std::string(line), e.what()});
    }
  }
  if (result.seeds.empty()) {
    throw EmptyCorpus("no valid addresses in " + std::to_string(result.lines_read) + " lines (" +
                      std::to_string(result.rejects.size()) + " rejected)");
  }
  return result;
}

SeedSet prescan_seeds(const SeedSet& seeds, Prober& prober) {
  const auto verdicts = prober.probe_batch(seeds.addresses());
  if (verdicts.size() != seeds.size()) {
    throw ProberUnavailable("prober returned " + std::to_string(verdicts.size()) + " verdicts for " +
                            std::to_string(seeds.size()) + " addresses");
  }
  SeedSet active;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (verdicts[i]) active.add(seeds.addresses()[i]);
  }
  return active;
}

AliasPrefixSet load_alias_prefixes(std::istream& source) {
  AliasPrefixSet set;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(source, raw)) {
    ++line_number;
    const std::string_view line = trim(raw);
    if (skippable(line)) continue;
    try {
      set.insert(parse_prefix(line));
    } catch (const MalformedPrefix& e) {
      throw MalformedPrefix("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return set;
}

void write_target_list(std::ostream& sink, std::span<const Ipv6Address> addresses) {
  for (const auto& a : addresses) sink << format_address(a) << '\n';
}

void write_seed_set(std::ostream& sink, const SeedSet& seeds) {
  write_target_list(sink, seeds.addresses());
}

std::vector<ScanResult> read_result_list(std::istream& source) {
  std::vector<ScanResult> results;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(source, raw)) {
    ++line_number;
    const std::string_view line = trim(raw);
    if (skippable(line)) continue;
    const auto comma = line.find(',');
    const std::string_view addr_text = trim(line.substr(0, comma));
    bool active = true;
    if (comma != std::string_view::npos) {
      const std::string_view flag = trim(line.substr(comma + 1));
      if (flag == "1") {
        active = true;
      } else if (flag == "0") {
        active = false;
      } else {
        throw MalformedResultLine("line " + std::to_string(line_number) + ": bad activity flag '" +
                                  std::string(flag) + "'");
      }
    }
    try {
      results.push_back({parse_address(addr_text), active});
    } catch (const MalformedAddress& e) {
      throw MalformedResultLine("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return results;
}

std::vector<Ipv6Address> read_address_list(std::istream& source) {
  std::vector<Ipv6Address> out;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(source, raw)) {
    ++line_number;
    const std::string_view line = trim(raw);
    if (skippable(line)) continue;
    try {
      out.push_back(parse_address(line));
    } catch (const MalformedAddress& e) {
      throw MalformedAddress("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sixdiff

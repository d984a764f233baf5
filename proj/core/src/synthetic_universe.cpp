#include "sixdiff/synthetic_universe.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

std::uint64_t pick(std::mt19937_64& rng, std::uint64_t bound) { return rng() % bound; }

const char* kind_name(PatternKind k) {
  switch (k) {
    case PatternKind::kLowByte: return "lowbyte";
    case PatternKind::kWords: return "words";
    case PatternKind::kStride: return "stride";
  }
  return "?";
}

}  // namespace

bool IidPattern::matches(std::uint64_t iid) const {
  switch (kind) {
    case PatternKind::kLowByte:
      return iid >= 1 && iid <= count;
    case PatternKind::kWords: {
      if ((iid >> 32) != 0) return false;
      const std::uint64_t g7 = (iid >> 16) & 0xFFFF;
      const std::uint64_t g8 = iid & 0xFFFF;
      return g7 >= base && g7 < base + count && g8 >= 1 && g8 <= width;
    }
    case PatternKind::kStride:
      return iid >= base && (iid - base) % stride == 0 && (iid - base) / stride < count;
  }
  return false;
}

std::uint64_t IidPattern::size() const {
  return kind == PatternKind::kWords ? std::uint64_t{count} * width : count;
}

std::vector<std::uint64_t> IidPattern::enumerate() const {
  std::vector<std::uint64_t> out;
  out.reserve(size());
  switch (kind) {
    case PatternKind::kLowByte:
      for (std::uint64_t i = 1; i <= count; ++i) out.push_back(i);
      break;
    case PatternKind::kWords:
      for (std::uint64_t g7 = base; g7 < base + count; ++g7) {
        for (std::uint64_t g8 = 1; g8 <= width; ++g8) out.push_back((g7 << 16) | g8);
      }
      break;
    case PatternKind::kStride:
      for (std::uint64_t i = 0; i < count; ++i) out.push_back(base + stride * i);
      break;
  }
  return out;
}

void UniverseConfig::validate() const {
  if (slash32_count < 1 || slash48_per_32 < 1) throw InvalidConfig("universe needs at least one /32 and /48");
  if (active_prefixes < 1) throw InvalidConfig("universe needs at least one active prefix");
  if (active_prefixes > slash32_count * slash48_per_32 * 256) throw InvalidConfig("too many active prefixes");
  if (alias_regions < 0 || alias_regions > active_prefixes) {
    throw InvalidConfig("alias_regions must lie in [0, active_prefixes]");
  }
  if (min_pattern_size < 1 || min_pattern_size > max_pattern_size || max_pattern_size > 4000) {
    throw InvalidConfig("pattern sizes must satisfy 1 <= min <= max <= 4000");
  }
}

SyntheticUniverse::SyntheticUniverse(std::uint64_t seed, std::vector<ActivePrefix> active, std::vector<Prefix> aliases)
    : seed_(seed), active_(std::move(active)), aliases_(std::move(aliases)) {
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const auto& p = active_[i].prefix;
    if (p.length() != 64) throw InvalidConfig("active prefixes must be /64: " + format_prefix(p));
    if (!by_high_.emplace(p.bits().high(), i).second) throw InvalidConfig("duplicate active prefix " + format_prefix(p));
  }
  for (const auto& a : aliases_) {
    if (a.length() != 96) throw InvalidConfig("alias regions must be /96: " + format_prefix(a));
    alias_heads_.insert(a.bits());
  }
}

bool SyntheticUniverse::matches_pattern(const Ipv6Address& address) const {
  const auto it = by_high_.find(address.high());
  return it != by_high_.end() && active_[it->second].pattern.matches(address.low());
}

bool SyntheticUniverse::in_alias_region(const Ipv6Address& address) const {
  return alias_heads_.contains(mask_address(address, 96));
}

bool SyntheticUniverse::is_active(const Ipv6Address& address) const {
  return matches_pattern(address) || in_alias_region(address);
}

std::vector<Ipv6Address> SyntheticUniverse::enumerate_active() const {
  std::vector<Ipv6Address> out;
  out.reserve(active_count());
  for (const auto& ap : active_) {
    for (std::uint64_t iid : ap.pattern.enumerate()) out.emplace_back(ap.prefix.bits().high(), iid);
  }
  return out;
}

std::uint64_t SyntheticUniverse::active_count() const {
  std::uint64_t n = 0;
  for (const auto& ap : active_) n += ap.pattern.size();
  return n;
}

bool SyntheticUniverse::same_active(const SyntheticUniverse& other) const {
  return std::equal(active_.begin(), active_.end(), other.active_.begin(), other.active_.end(),
                    [](const ActivePrefix& a, const ActivePrefix& b) {
                      return a.prefix == b.prefix && a.pattern == b.pattern;
                    });
}

SyntheticUniverse build_universe(const UniverseConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);

  std::vector<std::uint64_t> slash32;
  while (slash32.size() < static_cast<std::size_t>(config.slash32_count)) {
    const std::uint64_t h = 0x20000000ULL | pick(rng, 0x10000000ULL);
    if (std::find(slash32.begin(), slash32.end(), h) == slash32.end()) slash32.push_back(h);
  }
  std::vector<std::uint64_t> slash48;
  for (std::uint64_t h : slash32) {
    std::vector<std::uint64_t> subs;
    while (subs.size() < static_cast<std::size_t>(config.slash48_per_32)) {
      const std::uint64_t s = pick(rng, 0x10000);
      if (std::find(subs.begin(), subs.end(), s) == subs.end()) subs.push_back(s);
    }
    for (std::uint64_t s : subs) slash48.push_back((h << 16) | s);
  }

  std::vector<ActivePrefix> active;
  std::unordered_set<std::uint64_t> used;
  const std::uint32_t spread = config.max_pattern_size - config.min_pattern_size + 1;
  for (int i = 0; i < config.active_prefixes; ++i) {
    const std::uint64_t head48 = slash48[static_cast<std::size_t>(i) % slash48.size()];
    std::uint64_t high = 0;
    do {
      high = (head48 << 16) | pick(rng, 256);
    } while (!used.insert(high).second);

    IidPattern pat;
    const auto size = static_cast<std::uint32_t>(config.min_pattern_size + pick(rng, spread));
    switch (i % 3) {
      case 0:
        pat.kind = PatternKind::kLowByte;
        pat.count = size;
        break;
      case 1:
        pat.kind = PatternKind::kWords;
        pat.width = static_cast<std::uint32_t>(std::min<std::uint64_t>(size, 20 + pick(rng, 30)));
        pat.count = std::max<std::uint32_t>(1, size / pat.width);
        if (pat.size() < config.min_pattern_size) {
          pat.width = (config.min_pattern_size + pat.count - 1) / pat.count;
        }
        pat.base = 1 + pick(rng, 16);
        if (pat.size() > config.max_pattern_size) pat = IidPattern{PatternKind::kLowByte, 0, 1, size, 0};
        break;
      default: {
        static constexpr std::uint64_t kStrides[] = {0x10, 0x100, 0x1000};
        pat.kind = PatternKind::kStride;
        pat.stride = kStrides[pick(rng, 3)];
        pat.base = 1 + pat.stride * pick(rng, 4);
        pat.count = size;
        break;
      }
    }
    active.push_back({Prefix(Ipv6Address(high, 0), 64), pat});
  }

  std::vector<std::size_t> order(active.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick(rng, i)]);
  std::vector<Prefix> aliases;
  for (int k = 0; k < config.alias_regions; ++k) {
    const std::uint64_t high = active[order[static_cast<std::size_t>(k)]].prefix.bits().high();
    // A nonzero top IID word keeps alias regions clear of every pattern.
    const std::uint64_t g5 = 0x1000 + pick(rng, 0xF000);
    const std::uint64_t g6 = pick(rng, 0x10000);
    aliases.emplace_back(Ipv6Address(high, (g5 << 48) | (g6 << 32)), 96);
  }
  return SyntheticUniverse(seed, std::move(active), std::move(aliases));
}

std::vector<bool> oracle_probe(const SyntheticUniverse& universe, std::span<const Ipv6Address> addresses) {
  std::vector<bool> out(addresses.size());
  for (std::size_t i = 0; i < addresses.size(); ++i) out[i] = universe.is_active(addresses[i]);
  return out;
}

SeedSet sample_seeds(const SyntheticUniverse& universe, std::size_t n, std::uint64_t seed) {
  auto pool = universe.enumerate_active();
  if (n > pool.size()) {
    throw InvalidConfig("universe holds " + std::to_string(pool.size()) + " active addresses, asked for " +
                        std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + pick(rng, pool.size() - i)]);
  pool.resize(n);
  return SeedSet(pool);
}

CandidateSet random_baseline(const SyntheticUniverse& universe, std::size_t m, std::uint64_t seed) {
  const auto& active = universe.active_prefixes();
  if (active.empty()) throw InvalidConfig("universe has no active prefixes");
  std::mt19937_64 rng(seed);
  CandidateSet out;
  out.run_id = "baseline-seed" + std::to_string(seed);
  out.addresses.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& head = active[pick(rng, active.size())].prefix.bits();
    out.addresses.emplace_back(head.high(), rng());
  }
  return out;
}

void dump_universe(std::ostream& out, const SyntheticUniverse& u) {
  out << "seed " << u.seed() << '\n';
  for (const auto& ap : u.active_prefixes()) {
    const auto& p = ap.pattern;
    out << "active " << format_prefix(ap.prefix) << ' ' << kind_name(p.kind);
    switch (p.kind) {
      case PatternKind::kLowByte: out << ' ' << p.count; break;
      case PatternKind::kWords: out << ' ' << p.base << ' ' << p.count << ' ' << p.width; break;
      case PatternKind::kStride: out << ' ' << p.base << ' ' << p.stride << ' ' << p.count; break;
    }
    out << '\n';
  }
  for (const auto& a : u.alias_regions()) out << "alias " << format_prefix(a) << '\n';
}

SyntheticUniverse restore_universe(std::istream& in) {
  std::uint64_t seed = 0;
  std::vector<ActivePrefix> active;
  std::vector<Prefix> aliases;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    auto fail = [&](const std::string& why) {
      return InvalidConfig("universe line " + std::to_string(line_number) + ": " + why);
    };
    try {
      if (tag == "seed") {
        if (!(fields >> seed)) throw fail("bad seed");
      } else if (tag == "alias") {
        std::string text;
        if (!(fields >> text)) throw fail("missing prefix");
        aliases.push_back(parse_prefix(text));
      } else if (tag == "active") {
        std::string text, kind;
        if (!(fields >> text >> kind)) throw fail("missing prefix or pattern");
        IidPattern p;
        bool ok = false;
        if (kind == "lowbyte") {
          p.kind = PatternKind::kLowByte;
          ok = static_cast<bool>(fields >> p.count);
        } else if (kind == "words") {
          p.kind = PatternKind::kWords;
          ok = static_cast<bool>(fields >> p.base >> p.count >> p.width);
        } else if (kind == "stride") {
          p.kind = PatternKind::kStride;
          ok = static_cast<bool>(fields >> p.base >> p.stride >> p.count);
          ok = ok && p.stride > 0;
        }
        if (!ok) throw fail("bad pattern '" + kind + "'");
        active.push_back({parse_prefix(text), p});
      } else {
        throw fail("unknown record '" + tag + "'");
      }
    } catch (const MalformedPrefix& e) {
      throw fail(e.what());
    }
  }
  return SyntheticUniverse(seed, std::move(active), std::move(aliases));
}

}  // namespace sixdiff

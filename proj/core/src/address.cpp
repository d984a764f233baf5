#include "sixdiff/address.hpp"

#include <charconv>
#include <vector>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Splits a run of colon-separated groups. An empty run yields no groups.
std::vector<std::uint16_t> parse_groups(std::string_view run, std::string_view whole) {
  std::vector<std::uint16_t> groups;
  if (run.empty()) return groups;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = run.find(':', start);
    const std::string_view group = run.substr(start, end == std::string_view::npos ? run.npos : end - start);
    if (group.empty() || group.size() > 4) {
      throw MalformedAddress("bad group in '" + std::string(whole) + "'");
    }
    std::uint32_t value = 0;
    for (char c : group) {
      const int v = hex_value(c);
      if (v < 0) throw MalformedAddress("bad character in '" + std::string(whole) + "'");
      value = (value << 4) | static_cast<std::uint32_t>(v);
    }
    groups.push_back(static_cast<std::uint16_t>(value));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return groups;
}

std::array<std::uint16_t, 8> to_groups(const Ipv6Address& a) {
  std::array<std::uint16_t, 8> g{};
  for (int i = 0; i < 4; ++i) {
    g[i] = static_cast<std::uint16_t>(a.high() >> (48 - 16 * i));
    g[i + 4] = static_cast<std::uint16_t>(a.low() >> (48 - 16 * i));
  }
  return g;
}

Ipv6Address from_groups(const std::array<std::uint16_t, 8>& g) {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  for (int i = 0; i < 4; ++i) {
    hi = (hi << 16) | g[i];
    lo = (lo << 16) | g[i + 4];
  }
  return {hi, lo};
}

std::uint64_t high_mask(int length) {
  if (length <= 0) return 0;
  if (length >= 64) return ~0ULL;
  return ~0ULL << (64 - length);
}

}  // namespace

NybbleSequence NybbleSequence::from_values(std::span<const std::uint8_t> values) {
  if (values.size() != kNybbleCount) {
    throw MalformedAddress("nybble sequence must have 32 elements, got " + std::to_string(values.size()));
  }
  NybbleSequence seq;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= kNybbleVocab) {
      throw MalformedAddress("nybble " + std::to_string(i) + " out of range");
    }
    seq.values_[i] = values[i];
  }
  return seq;
}

Prefix::Prefix(Ipv6Address bits, int length) : length_(length) {
  if (length < 0 || length > kAddressBits) {
    throw MalformedPrefix("prefix length " + std::to_string(length) + " outside [0, 128]");
  }
  bits_ = mask_address(bits, length);
}

bool Prefix::contains(const Ipv6Address& address) const {
  return mask_address(address, length_) == bits_;
}

Ipv6Address mask_address(const Ipv6Address& address, int length) {
  return {address.high() & high_mask(length), address.low() & high_mask(length - 64)};
}

Ipv6Address parse_address(std::string_view text) {
  if (text.empty()) throw MalformedAddress("empty address");
  if (text.find('.') != std::string_view::npos) {
    throw MalformedAddress("IPv4 dotted-quad forms are not supported: '" + std::string(text) + "'");
  }
  if (text.find('%') != std::string_view::npos) {
    throw MalformedAddress("zone identifiers are not supported: '" + std::string(text) + "'");
  }

  const std::size_t gap = text.find("::");
  std::array<std::uint16_t, 8> groups{};
  if (gap == std::string_view::npos) {
    const auto parsed = parse_groups(text, text);
    if (parsed.size() != 8) {
      throw MalformedAddress("expected 8 groups in '" + std::string(text) + "'");
    }
    std::copy(parsed.begin(), parsed.end(), groups.begin());
  } else {
    if (text.find("::", gap + 1) != std::string_view::npos) {
      throw MalformedAddress("multiple '::' in '" + std::string(text) + "'");
    }
    const auto head = parse_groups(text.substr(0, gap), text);
    const auto tail = parse_groups(text.substr(gap + 2), text);
    if (head.size() + tail.size() > 7) {
      throw MalformedAddress("too many groups in '" + std::string(text) + "'");
    }
    std::copy(head.begin(), head.end(), groups.begin());
    std::copy(tail.begin(), tail.end(), groups.end() - static_cast<std::ptrdiff_t>(tail.size()));
  }
  return from_groups(groups);
}

std::string format_address(const Ipv6Address& address) {
  const auto g = to_groups(address);

  int best_start = -1;
  int best_len = 0;
  for (int i = 0; i < 8;) {
    if (g[i] != 0) {
      ++i;
      continue;
    }
    int j = i;
    while (j < 8 && g[j] == 0) ++j;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j;
  }
  if (best_len < 2) best_start = -1;

  std::string out;
  out.reserve(39);
  char buf[8];
  for (int i = 0; i < 8; ++i) {
    if (i == best_start) {
      out += "::";
      i += best_len - 1;
      continue;
    }
    if (!out.empty() && out.back() != ':') out += ':';
    const auto res = std::to_chars(buf, buf + sizeof(buf), g[i], 16);
    out.append(buf, res.ptr);
  }
  return out;
}

std::string format_address_full(const Ipv6Address& address) {
  std::string out;
  out.reserve(39);
  for (int i = 0; i < kNybbleCount; ++i) {
    if (i > 0 && i % 4 == 0) out += ':';
    out += kHexDigits[address.nybble(i)];
  }
  return out;
}

NybbleSequence to_nybbles(const Ipv6Address& address) {
  std::array<std::uint8_t, kNybbleCount> values{};
  for (int i = 0; i < kNybbleCount; ++i) values[i] = static_cast<std::uint8_t>(address.nybble(i));
  return NybbleSequence::from_values(values);
}

Ipv6Address from_nybbles(const NybbleSequence& nybbles) {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  for (int i = 0; i < 16; ++i) {
    hi = (hi << 4) | nybbles[i];
    lo = (lo << 4) | nybbles[i + 16];
  }
  return {hi, lo};
}

std::string to_word_address(const NybbleSequence& nybbles) {
  std::string out;
  out.reserve(2 * kNybbleCount - 1);
  for (std::size_t i = 0; i < nybbles.size(); ++i) {
    if (i > 0) out += ' ';
    out += kHexDigits[nybbles[i]];
  }
  return out;
}

NybbleSequence parse_word_address(std::string_view text) {
  if (text.size() != 2 * kNybbleCount - 1) {
    throw MalformedAddress("word address must be 63 characters, got " + std::to_string(text.size()));
  }
  std::array<std::uint8_t, kNybbleCount> values{};
  for (int i = 0; i < kNybbleCount; ++i) {
    const int v = hex_value(text[2 * i]);
    if (v < 0 || (i > 0 && text[2 * i - 1] != ' ')) {
      throw MalformedAddress("bad word address '" + std::string(text) + "'");
    }
    values[i] = static_cast<std::uint8_t>(v);
  }
  return NybbleSequence::from_values(values);
}

Prefix prefix_of(const Ipv6Address& address, int length) { return Prefix(address, length); }

Prefix parse_prefix(std::string_view text) {
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw MalformedPrefix("missing '/' in '" + std::string(text) + "'");
  }
  const std::string_view len_text = text.substr(slash + 1);
  int length = -1;
  const auto res = std::from_chars(len_text.data(), len_text.data() + len_text.size(), length);
  if (res.ec != std::errc{} || res.ptr != len_text.data() + len_text.size() || length < 0 ||
      length > kAddressBits) {
    throw MalformedPrefix("bad prefix length in '" + std::string(text) + "'");
  }
  try {
    return Prefix(parse_address(text.substr(0, slash)), length);
  } catch (const MalformedAddress& e) {
    throw MalformedPrefix(e.what());
  }
}

std::string format_prefix(const Prefix& prefix) {
  return format_address(prefix.bits()) + "/" + std::to_string(prefix.length());
}

}  // namespace sixdiff

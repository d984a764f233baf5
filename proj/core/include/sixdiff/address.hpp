#pragma once

// IPv6 address values, nybble tokenization, and prefix masking.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>

namespace sixdiff {

inline constexpr int kAddressBits = 128;
inline constexpr int kNybbleCount = 32;
inline constexpr int kNybbleVocab = 16;

/// A 128-bit IPv6 address held as two 64-bit halves in network order.
/// Bit 0 is the most significant bit of the address.
class Ipv6Address {
 public:
  constexpr Ipv6Address() = default;
  constexpr Ipv6Address(std::uint64_t high, std::uint64_t low) : high_(high), low_(low) {}

  constexpr std::uint64_t high() const { return high_; }
  constexpr std::uint64_t low() const { return low_; }

  /// 0-based nybble index, most significant first.
  constexpr int nybble(int index) const {
    const std::uint64_t half = index < 16 ? high_ : low_;
    const int shift = 4 * (15 - (index % 16));
    return static_cast<int>((half >> shift) & 0xF);
  }

  constexpr bool bit(int index) const {
    const std::uint64_t half = index < 64 ? high_ : low_;
    return ((half >> (63 - (index % 64))) & 1U) != 0;
  }

  constexpr auto operator<=>(const Ipv6Address&) const = default;

 private:
  std::uint64_t high_ = 0;
  std::uint64_t low_ = 0;
};

/// 32 nybbles, each in [0, 15], most significant first.
class NybbleSequence {
 public:
  NybbleSequence() { values_.fill(0); }

  /// Throws MalformedAddress unless there are exactly 32 values, all < 16.
  static NybbleSequence from_values(std::span<const std::uint8_t> values);

  std::uint8_t operator[](std::size_t i) const { return values_[i]; }
  const std::array<std::uint8_t, kNybbleCount>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool operator==(const NybbleSequence&) const = default;

 private:
  std::array<std::uint8_t, kNybbleCount> values_;
};

/// An address with everything past `length` cleared.
class Prefix {
 public:
  Prefix() = default;
  /// Masks `bits` to `length`; throws MalformedPrefix if length is outside [0, 128].
  Prefix(Ipv6Address bits, int length);

  const Ipv6Address& bits() const { return bits_; }
  int length() const { return length_; }

  bool contains(const Ipv6Address& address) const;

  bool operator==(const Prefix&) const = default;

 private:
  Ipv6Address bits_;
  int length_ = 0;
};

/// Parses full or "::"-compressed RFC 4291 text. Dotted-quad suffixes and
/// zone identifiers are rejected.
Ipv6Address parse_address(std::string_view text);

/// RFC 5952 canonical text: lowercase, no leading zeros, longest zero run
/// (of at least two groups) compressed to "::".
std::string format_address(const Ipv6Address& address);

/// Eight groups of four hex digits, no compression.
std::string format_address_full(const Ipv6Address& address);

NybbleSequence to_nybbles(const Ipv6Address& address);
Ipv6Address from_nybbles(const NybbleSequence& nybbles);

/// "2 0 0 1 0 d b 8 ..." form: 32 lowercase hex digits separated by single spaces.
std::string to_word_address(const NybbleSequence& nybbles);
NybbleSequence parse_word_address(std::string_view text);

Prefix prefix_of(const Ipv6Address& address, int length);

/// "address/length" CIDR text. Host bits past the length are cleared.
Prefix parse_prefix(std::string_view text);
std::string format_prefix(const Prefix& prefix);

/// Address with the low (128 - length) bits cleared.
Ipv6Address mask_address(const Ipv6Address& address, int length);

struct AddressHash {
  std::size_t operator()(const Ipv6Address& a) const noexcept {
    std::uint64_t h = a.high() * 0x9E3779B97F4A7C15ULL;
    h ^= a.low() + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2);
    h ^= h >> 31;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ULL);
  }
};

struct PrefixHash {
  std::size_t operator()(const Prefix& p) const noexcept {
    return AddressHash{}(p.bits()) ^ (static_cast<std::size_t>(p.length()) * 0x94D049BB133111EBULL);
  }
};

}  // namespace sixdiff

template <>
struct std::hash<sixdiff::Ipv6Address> : sixdiff::AddressHash {};
template <>
struct std::hash<sixdiff::Prefix> : sixdiff::PrefixHash {};

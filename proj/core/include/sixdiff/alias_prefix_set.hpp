#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sixdiff/address.hpp"

namespace sixdiff {

/// Binary trie over address bits holding known alias prefixes.
/// Nested prefixes are allowed; an address is covered when any stored
/// prefix contains it.
class AliasPrefixSet {
 public:
  AliasPrefixSet();

  void insert(const Prefix& prefix);

  bool covers(const Ipv6Address& address) const;

  /// Shortest stored prefix containing `address`, if any.
  std::optional<Prefix> covering_prefix(const Ipv6Address& address) const;

  /// Distinct prefixes stored.
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  std::vector<Prefix> prefixes() const;

 private:
  struct Node {
    std::int32_t child[2] = {-1, -1};
    bool terminal = false;
  };

  std::vector<Node> nodes_;
  std::size_t count_ = 0;
};

}  // namespace sixdiff

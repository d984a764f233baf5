#include "sixdiff/alias_prefix_set.hpp"

#include <utility>

namespace sixdiff {

AliasPrefixSet::AliasPrefixSet() : nodes_(1) {}

void AliasPrefixSet::insert(const Prefix& prefix) {
  std::int32_t node = 0;
  for (int depth = 0; depth < prefix.length(); ++depth) {
    const int b = prefix.bits().bit(depth) ? 1 : 0;
    if (nodes_[node].child[b] < 0) {
      nodes_[node].child[b] = static_cast<std::int32_t>(nodes_.size());
      nodes_.emplace_back();
    }
    node = nodes_[node].child[b];
  }
  if (!nodes_[node].terminal) {
    nodes_[node].terminal = true;
    ++count_;
  }
}

bool AliasPrefixSet::covers(const Ipv6Address& address) const {
  return covering_prefix(address).has_value();
}

std::optional<Prefix> AliasPrefixSet::covering_prefix(const Ipv6Address& address) const {
  std::int32_t node = 0;
  for (int depth = 0;; ++depth) {
    if (nodes_[node].terminal) return Prefix(address, depth);
    if (depth == kAddressBits) return std::nullopt;
    node = nodes_[node].child[address.bit(depth) ? 1 : 0];
    if (node < 0) return std::nullopt;
  }
}

std::vector<Prefix> AliasPrefixSet::prefixes() const {
  std::vector<Prefix> out;
  out.reserve(count_);
  // (node, depth, path bits)
  struct Frame {
    std::int32_t node;
    int depth;
    Ipv6Address path;
  };
  std::vector<Frame> stack{{0, 0, Ipv6Address{}}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (nodes_[f.node].terminal) out.emplace_back(f.path, f.depth);
    for (int b = 1; b >= 0; --b) {
      const std::int32_t c = nodes_[f.node].child[b];
      if (c < 0) continue;
      Ipv6Address next = f.path;
      if (b == 1) {
        next = f.depth < 64 ? Ipv6Address(next.high() | (1ULL << (63 - f.depth)), next.low())
                            : Ipv6Address(next.high(), next.low() | (1ULL << (127 - f.depth)));
      }
      stack.push_back({c, f.depth + 1, next});
    }
  }
  return out;
}

}  // namespace sixdiff

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <unordered_set>
#include <vector>

#include "sixdiff/address.hpp"

namespace sixdiff {

/// Source of activity verdicts. Verdicts are order-aligned with the input.
class Prober {
 public:
  virtual ~Prober() = default;
  virtual std::vector<bool> probe_batch(std::span<const Ipv6Address> addresses) = 0;
};

/// Answers from a result file produced by an external scanner run
/// out-of-band. Every queried address is appended to a target log so the
/// scan can be (re)issued; addresses absent from the results are inactive.
class ResultFileProber : public Prober {
 public:
  /// Throws ProberUnavailable if `results` cannot be read.
  ResultFileProber(const std::filesystem::path& results, std::filesystem::path target_log = {});

  std::vector<bool> probe_batch(std::span<const Ipv6Address> addresses) override;

  std::size_t active_count() const { return active_.size(); }

 private:
  std::unordered_set<Ipv6Address> active_;
  std::filesystem::path target_log_;
};

/// Forwards to another prober and counts addresses probed.
class CountingProber : public Prober {
 public:
  explicit CountingProber(Prober& inner) : inner_(inner) {}

  std::vector<bool> probe_batch(std::span<const Ipv6Address> addresses) override {
    probes_ += addresses.size();
    ++batches_;
    return inner_.probe_batch(addresses);
  }

  std::size_t probes() const { return probes_; }
  std::size_t batches() const { return batches_; }

 private:
  Prober& inner_;
  std::size_t probes_ = 0;
  std::size_t batches_ = 0;
};

}  // namespace sixdiff

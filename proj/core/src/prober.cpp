#include "sixdiff/prober.hpp"

#include <fstream>

#include "sixdiff/errors.hpp"
#include "sixdiff/seed_corpus.hpp"

namespace sixdiff {

ResultFileProber::ResultFileProber(const std::filesystem::path& results, std::filesystem::path target_log)
    : target_log_(std::move(target_log)) {
  std::ifstream in(results);
  if (!in) throw ProberUnavailable("cannot open scan results '" + results.string() + "'");
  for (const auto& r : read_result_list(in)) {
    if (r.active) active_.insert(r.address);
  }
}

std::vector<bool> ResultFileProber::probe_batch(std::span<const Ipv6Address> addresses) {
  if (!target_log_.empty()) {
    std::ofstream log(target_log_, std::ios::app);
    if (!log) throw ProberUnavailable("cannot append to target log '" + target_log_.string() + "'");
    write_target_list(log, addresses);
  }
  std::vector<bool> verdicts(addresses.size());
  for (std::size_t i = 0; i < addresses.size(); ++i) verdicts[i] = active_.contains(addresses[i]);
  return verdicts;
}

}  // namespace sixdiff

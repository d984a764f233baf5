#include "sixdiff/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

double safe_ratio(std::size_t num, std::size_t den) {
  if (den == 0) throw EmptyCandidateSet("metrics need at least one candidate");
  return static_cast<double>(num) / static_cast<double>(den);
}

std::unordered_set<Prefix> seed_prefixes(const SeedSet& seeds, int length) {
  std::unordered_set<Prefix> out;
  out.reserve(seeds.size());
  for (const auto& a : seeds.addresses()) out.insert(prefix_of(a, length));
  return out;
}

PrefixCounts count_prefixes(const EvaluationInput& input, int length, const std::unordered_set<Prefix>& seed_set) {
  std::unordered_set<Prefix> candidate_set;
  std::unordered_set<Prefix> generated_set;
  const auto& c = input.candidates();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Prefix p = prefix_of(c[i], length);
    candidate_set.insert(p);
    if (input.active()[i] && !input.seeds().contains(c[i])) generated_set.insert(p);
  }
  PrefixCounts pc;
  pc.length = length;
  pc.candidate_prefixes = candidate_set.size();
  pc.generated_prefixes = generated_set.size();
  for (const auto& p : candidate_set) pc.candidate_new_prefixes += seed_set.contains(p) ? 0 : 1;
  for (const auto& p : generated_set) pc.generated_new_prefixes += seed_set.contains(p) ? 0 : 1;
  return pc;
}

PrefixRate make_rate(std::size_t prefixes, std::size_t new_prefixes, std::size_t n_candidate) {
  PrefixRate r;
  r.prefixes = prefixes;
  r.new_prefixes = new_prefixes;
  r.ratio = safe_ratio(new_prefixes, n_candidate);
  r.per10k = r.ratio * 10000.0;
  return r;
}

std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

}  // namespace

EvaluationInput::EvaluationInput(std::vector<Ipv6Address> candidates, const SeedSet& seeds, std::vector<bool> active,
                                 std::vector<bool> alias)
    : candidates_(std::move(candidates)), seeds_(&seeds), active_(std::move(active)), alias_(std::move(alias)) {
  if (active_.size() != candidates_.size() || alias_.size() != candidates_.size()) {
    throw ShapeMismatch("activity/alias flags must align with candidates");
  }
  std::unordered_set<Ipv6Address> seen;
  seen.reserve(candidates_.size());
  for (const auto& a : candidates_) {
    if (!seen.insert(a).second) throw InvalidConfig("candidate set must be deduplicated: " + format_address(a));
  }
}

double hit_rate(const EvaluationInput& input) {
  std::size_t hits = 0;
  for (bool a : input.active()) hits += a ? 1 : 0;
  return safe_ratio(hits, input.candidates().size());
}

double generation_rate(const EvaluationInput& input) {
  std::size_t fresh = 0;
  const auto& c = input.candidates();
  for (std::size_t i = 0; i < c.size(); ++i) fresh += (input.active()[i] && !input.seeds().contains(c[i])) ? 1 : 0;
  return safe_ratio(fresh, c.size());
}

double nonalias_rate(const EvaluationInput& input) {
  std::size_t aliased = 0;
  for (bool a : input.alias()) aliased += a ? 1 : 0;
  return safe_ratio(input.candidates().size() - aliased, input.candidates().size());
}

PrefixRate candidate_new_prefix_rate(const EvaluationInput& input, int length) {
  const auto pc = count_prefixes(input, length, seed_prefixes(input.seeds(), length));
  return make_rate(pc.candidate_prefixes, pc.candidate_new_prefixes, input.candidates().size());
}

PrefixRate generation_new_prefix_rate(const EvaluationInput& input, int length) {
  const auto pc = count_prefixes(input, length, seed_prefixes(input.seeds(), length));
  return make_rate(pc.generated_prefixes, pc.generated_new_prefixes, input.candidates().size());
}

MetricCounts count_metrics(const EvaluationInput& input, std::span<const int> prefix_lengths) {
  MetricCounts mc;
  const auto& c = input.candidates();
  mc.n_candidate = c.size();
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (input.active()[i]) {
      ++mc.n_hit;
      if (input.seeds().contains(c[i])) ++mc.n_repeat;
    }
    if (input.alias()[i]) ++mc.n_aliased;
  }
  for (int length : prefix_lengths) {
    mc.prefixes.push_back(count_prefixes(input, length, seed_prefixes(input.seeds(), length)));
  }
  return mc;
}

MetricsReport report_from_counts(const MetricCounts& counts) {
  if (counts.n_repeat > counts.n_hit) throw InvalidConfig("n_repeat exceeds n_hit");
  if (counts.n_aliased > counts.n_candidate) throw InvalidConfig("n_aliased exceeds n_candidate");
  MetricsReport r;
  r.counts = counts;
  r.hit_rate = safe_ratio(counts.n_hit, counts.n_candidate);
  r.generation_rate = safe_ratio(counts.n_hit - counts.n_repeat, counts.n_candidate);
  r.nonalias_rate = safe_ratio(counts.n_candidate - counts.n_aliased, counts.n_candidate);
  for (const auto& pc : counts.prefixes) {
    PrefixReport pr;
    pr.length = pc.length;
    pr.candidate = make_rate(pc.candidate_prefixes, pc.candidate_new_prefixes, counts.n_candidate);
    pr.generation = make_rate(pc.generated_prefixes, pc.generated_new_prefixes, counts.n_candidate);
    r.prefixes.push_back(pr);
  }
  return r;
}

MetricsReport full_report(const EvaluationInput& input, std::span<const int> prefix_lengths) {
  return report_from_counts(count_metrics(input, prefix_lengths));
}

void write_report_tsv(std::ostream& out, const MetricsReport& r) {
  const auto& c = r.counts;
  out << "metric\tprefix_length\tnumerator\tdenominator\tratio\tper10k\n";
  auto row = [&](const char* name, const std::string& length, std::size_t num, double ratio) {
    out << name << '\t' << length << '\t' << num << '\t' << c.n_candidate << '\t' << fixed(ratio, 4) << '\t'
        << fixed(ratio * 10000.0, 2) << '\n';
  };
  row("r_hit", "-", c.n_hit, r.hit_rate);
  row("r_gen", "-", c.n_hit - c.n_repeat, r.generation_rate);
  row("r_nonaliased", "-", c.n_candidate - c.n_aliased, r.nonalias_rate);
  for (const auto& p : r.prefixes) {
    const std::string len = std::to_string(p.length);
    row("r_cn_pre", len, p.candidate.new_prefixes, p.candidate.ratio);
    row("r_gn_pre", len, p.generation.new_prefixes, p.generation.ratio);
  }
  for (const auto& p : r.prefixes) {
    const std::string len = std::to_string(p.length);
    out << "n_c_pre\t" << len << '\t' << p.candidate.prefixes << "\t-\t-\t-\n";
    out << "n_g_pre\t" << len << '\t' << p.generation.prefixes << "\t-\t-\t-\n";
  }
}

void write_report_text(std::ostream& out, const MetricsReport& r) {
  const auto& c = r.counts;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %-12s %-12s %-10s %-12s %-12s %-10s %-10s\n", "N_candidate",
                "N_nonaliased", "r_nonalias", "N_hit", "N_gen", "r_hit", "r_gen", "");
  out << line;
  std::snprintf(line, sizeof(line), "%-12zu %-12zu %-12s %-10zu %-12zu %-12s %-10s\n", c.n_candidate,
                c.n_candidate - c.n_aliased, (fixed(100 * r.nonalias_rate, 2) + "%").c_str(), c.n_hit,
                c.n_hit - c.n_repeat, (fixed(100 * r.hit_rate, 2) + "%").c_str(),
                (fixed(100 * r.generation_rate, 2) + "%").c_str());
  out << line << '\n';
  std::snprintf(line, sizeof(line), "%-7s %-9s %-9s %-9s %-10s %-9s %-9s %-9s %-10s\n", "prefix", "N_c-pre",
                "N_cn-pre", "r_cn-pre", "cn/10k", "N_g-pre", "N_gn-pre", "r_gn-pre", "gn/10k");
  out << line;
  for (const auto& p : r.prefixes) {
    std::snprintf(line, sizeof(line), "/%-6d %-9zu %-9zu %-9s %-10s %-9zu %-9zu %-9s %-10s\n", p.length,
                  p.candidate.prefixes, p.candidate.new_prefixes, (fixed(100 * p.candidate.ratio, 2) + "%").c_str(),
                  fixed(p.candidate.per10k, 2).c_str(), p.generation.prefixes, p.generation.new_prefixes,
                  (fixed(100 * p.generation.ratio, 2) + "%").c_str(), fixed(p.generation.per10k, 2).c_str());
    out << line;
  }
}

MetricCounts read_counts(std::istream& in) {
  std::map<std::string, std::size_t> kv;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    std::string_view line(raw);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig("counts line " + std::to_string(line_number) + ": missing '='");
    std::string_view key = line.substr(0, eq);
    std::string_view value = line.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.remove_suffix(1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    std::size_t n = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), n);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
      throw InvalidConfig("counts line " + std::to_string(line_number) + ": bad number");
    }
    kv[std::string(key)] = n;
  }
  auto need = [&](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw InvalidConfig("counts fixture is missing '" + k + "'");
    return it->second;
  };
  MetricCounts mc;
  mc.n_candidate = need("n_candidate");
  mc.n_hit = need("n_hit");
  mc.n_repeat = kv.contains("n_repeat") ? kv["n_repeat"] : mc.n_hit - need("n_gen");
  mc.n_aliased = kv.contains("n_aliased") ? kv["n_aliased"] : mc.n_candidate - need("n_nonaliased");

  std::map<int, PrefixCounts> by_length;
  for (const auto& [key, value] : kv) {
    if (!key.starts_with("prefix.")) continue;
    const auto dot = key.find('.', 7);
    if (dot == std::string::npos) throw InvalidConfig("bad prefix key '" + key + "'");
    const int length = std::stoi(key.substr(7, dot - 7));
    const std::string field = key.substr(dot + 1);
    auto& pc = by_length[length];
    pc.length = length;
    if (field == "c_pre") pc.candidate_prefixes = value;
    else if (field == "cn_pre") pc.candidate_new_prefixes = value;
    else if (field == "g_pre") pc.generated_prefixes = value;
    else if (field == "gn_pre") pc.generated_new_prefixes = value;
    else throw InvalidConfig("unknown prefix field '" + field + "'");
  }
  for (const auto& [length, pc] : by_length) mc.prefixes.push_back(pc);
  return mc;
}

}  // namespace sixdiff

// Acceptance suite: one PASS/FAIL line per criterion.
//
//   sixdiff_acceptance            run all twelve
//   sixdiff_acceptance 3 7        run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sixdiff/address.hpp"
#include "sixdiff/alias_resolver.hpp"
#include "sixdiff/config.hpp"
#include "sixdiff/metrics.hpp"
#include "sixdiff/noise_schedule.hpp"
#include "sixdiff/pipeline.hpp"
#include "sixdiff/sampler.hpp"
#include "sixdiff/synthetic_universe.hpp"
#include "sixdiff/trainer.hpp"
#include "test_support.hpp"

using namespace sixdiff;
using testing_support::random_matrix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

Outcome published_arithmetic() {
  const Stopwatch clock;
  const auto values = testing_support::published_values();
  auto misses = [&](std::size_t n_candidate) {
    const auto report = report_from_counts(testing_support::published_counts(n_candidate));
    std::vector<std::string> out;
    for (const auto& v : values) {
      const double got = v.extract(report);
      if (std::abs(got - v.expected) > 0.01) out.push_back(format("%s %.2f (published %.2f)", v.label.c_str(), got, v.expected));
    }
    return out;
  };
  const auto at_published = misses(95092);
  const auto at_next = misses(95093);
  const double seconds = clock.seconds();
  std::string detail = format("%zu/%zu values within 0.01 at N_candidate=95092", values.size() - at_published.size(),
                              values.size());
  for (const auto& m : at_published) detail += "; " + m;
  detail += format("; %zu/%zu within 0.01 at N_candidate=95093; %.3fs", values.size() - at_next.size(),
                   values.size(), seconds);
  return {at_published.empty() && seconds < 1.0, detail};
}

Outcome mask_oracles() {
  std::set<int> windows;
  for (int w : ModelConfig{}.window_schedule) windows.insert(w);
  for (int w : desk_profile().model.window_schedule) windows.insert(w);
  std::size_t checked = 0;
  for (int n : {4, 8, 32}) {
    const auto g = global_mask(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (g.allowed(i, j) != (j <= i)) return {false, format("global mask n=%d differs at (%d, %d)", n, i, j)};
      }
    }
    ++checked;
    for (int w : windows) {
      if (w > n) continue;
      const auto l = local_mask(n, w);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (l.allowed(i, j) != (i / w == j / w)) {
            return {false, format("local mask n=%d w=%d differs at (%d, %d)", n, w, i, j)};
          }
        }
      }
      ++checked;
    }
  }
  return {true, format("%zu masks equal the brute-force predicates", checked)};
}

Outcome causality_isolation() {
  std::mt19937_64 rng(303);
  const int n = 32, d = 16, heads = 2;
  const auto layer = testing_support::random_layer(d, 32, rng);
  const auto causal = global_mask(n);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = random_matrix(n, d, rng);
    const Matrix base = multi_head_attention(x, layer.global, causal, heads);
    const int i = static_cast<int>(rng() % (n - 1));
    Matrix changed = x;
    changed.bottomRows(n - i - 1) = random_matrix(n - i - 1, d, rng, 3.0);
    const Matrix out = multi_head_attention(changed, layer.global, causal, heads);
    if (!(out.topRows(i + 1) == base.topRows(i + 1))) return {false, format("global output moved at i=%d", i)};
  }
  const std::vector<int> widths = {2, 4, 8, 16};
  for (int trial = 0; trial < 100; ++trial) {
    const int w = widths[rng() % widths.size()];
    const auto mask = local_mask(n, w);
    const Matrix x = random_matrix(n, d, rng);
    const Matrix base = multi_head_attention(x, layer.local, mask, heads);
    const int block = static_cast<int>(rng() % (n / w));
    Matrix changed = random_matrix(n, d, rng, 3.0);
    changed.middleRows(block * w, w) = x.middleRows(block * w, w);
    const Matrix out = multi_head_attention(changed, layer.local, mask, heads);
    if (!(out.middleRows(block * w, w) == base.middleRows(block * w, w))) {
      return {false, format("local block %d (w=%d) moved", block, w)};
    }
  }
  return {true, "100 causal and 100 block-isolation trials bit-unchanged"};
}

Outcome vanilla_equivalence() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int n : {8, 32}) {
    const int d = 16;
    const auto layer = testing_support::random_layer(d, 32, rng);
    const Matrix x = random_matrix(n, d, rng);
    Matrix both(n, 2 * d);
    both << testing_support::naive_attention(x, layer.global, 2), testing_support::naive_attention(x, layer.local, 4);
    const Matrix reference = both * layer.fusion + layer.fusion_bias.replicate(n, 1);
    const Matrix fused = glf_msa(x, layer, full_mask(n), local_mask(n, n), 2, 4);
    worst = std::max(worst, (fused - reference).norm() / reference.norm());
  }
  return {worst < 1e-5, format("worst relative error %.2e", worst)};
}

Outcome gradient_check() {
  const Stopwatch clock;
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    const auto r = testing_support::gradient_check(seed);
    checked += r.checked;
    if (r.worst_relative_error >= worst) {
      worst = r.worst_relative_error;
      where = r.worst_tensor + "[" + std::to_string(r.worst_index) + "]";
    }
  }
  const double seconds = clock.seconds();
  return {worst < 1e-4 && seconds < 120.0,
          format("3 draws, %zu scalars, worst relative error %.2e at %s, %.1fs", checked, worst, where.c_str(), seconds)};
}

Outcome schedule_properties() {
  const auto s = NoiseSchedule::linear(2000, 1e-6, 0.01);
  if (s.beta(1) != 1e-6 || std::abs(s.beta(2000) - 0.01) > 1e-15) return {false, "endpoints differ"};
  for (int t = 2; t <= 2000; ++t) {
    if (!(s.beta(t) > s.beta(t - 1))) return {false, format("beta not increasing at t=%d", t)};
    if (!(s.alpha_bar(t) < s.alpha_bar(t - 1))) return {false, format("alpha_bar not decreasing at t=%d", t)};
  }
  const int trials = 10000;
  std::mt19937_64 rng(606);
  std::normal_distribution<double> normal;
  std::string detail = "beta 1e-06..0.01 increasing, alpha_bar decreasing";
  for (int t : {10, 500, 2000}) {
    const double x0 = 1.5;
    double sum = 0.0, sum_sq = 0.0;
    Matrix x(1, 1), noise(1, 1);
    for (int k = 0; k < trials; ++k) {
      x(0, 0) = x0;
      for (int step = 1; step <= t; ++step) {
        noise(0, 0) = normal(rng);
        x = forward_chain_step(s, x, step, noise);
      }
      sum += x(0, 0);
      sum_sq += x(0, 0) * x(0, 0);
    }
    const double mean = sum / trials;
    const double var = sum_sq / trials - mean * mean;
    Matrix clean(1, 1);
    clean(0, 0) = x0;
    const double closed_mean = forward_sample(s, clean, t, Matrix::Zero(1, 1))(0, 0);
    Matrix unit(1, 1);
    unit(0, 0) = 1.0;
    const double closed_sd = forward_sample(s, Matrix::Zero(1, 1), t, unit)(0, 0);
    const double sigmas = std::abs(mean - closed_mean) / (closed_sd / std::sqrt(trials));
    const double var_error = std::abs(var / (closed_sd * closed_sd) - 1);
    detail += format("; t=%d mean %.2f sigma, variance %.1f%%", t, sigmas, 100 * var_error);
    if (sigmas > 3 || var_error > 0.05) return {false, detail};
  }
  return {true, detail};
}

Outcome ddim_algebra() {
  const auto s = NoiseSchedule::linear(2000, 1e-6, 0.01);
  std::mt19937_64 rng(707);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = 2 + static_cast<int>(rng() % 1999);
    const int prev = static_cast<int>(rng() % t);
    const Matrix x = random_matrix(32, 8, rng);
    const Matrix e = random_matrix(32, 8, rng);
    const double ab = s.alpha_bar(t), ab_prev = s.alpha_bar(prev);
    const Matrix direct = std::sqrt(ab_prev / ab) * x + (std::sqrt(1 - ab_prev) - std::sqrt(ab_prev * (1 - ab) / ab)) * e;
    const Matrix composed = ddim_update(x, e, t, prev, s);
    worst = std::max(worst, (composed - direct).norm() / direct.norm());
  }
  const auto steps = rescale_timesteps(2000, 5);
  const std::size_t iterations = steps.size() - 1;

  auto cfg = testing_support::tiny_config();
  cfg.seq_len = 32;
  cfg.window_schedule = {8, 32};
  const DenoiserModel model(cfg, 9);
  SamplerConfig sc;
  sc.count = 64;
  sc.batch_size = 16;
  sc.rng_seed = 21;
  const auto small = NoiseSchedule::linear(40, 1e-4, 0.1);
  const bool reproducible = generate(model, small, sc).addresses == generate(model, small, sc).addresses;
  return {worst < 1e-10 && iterations == 400 && reproducible,
          format("composite worst rel. error %.2e over 1000 instances; %zu iterations; generation %s", worst, iterations,
                 reproducible ? "bit-reproducible" : "NOT reproducible")};
}

Outcome singleton_overfit() {
  const Stopwatch clock;
  const auto config = desk_profile();
  const auto schedule = config.schedule.build();
  const Ipv6Address target = parse_address("2001:db8:42:7::1a");
  SeedSet corpus;
  corpus.add(target);
  DenoiserModel model(config.model, config.train.rng_seed);
  auto tc = config.train;
  tc.steps = 500;
  const auto losses = train(model, schedule, tc, corpus);
  // Single steps are noisy because each one draws its own timesteps.
  auto mean_total = [&](std::size_t from, std::size_t count) {
    double sum = 0.0;
    for (std::size_t i = from; i < from + count; ++i) sum += losses[i].total;
    return sum / count;
  };
  const double first = mean_total(0, 10);
  const double last = mean_total(losses.size() - 10, 10);
  auto sc = config.sampler;
  sc.count = 100;
  const auto draws = generate(model, schedule, sc);
  const auto matches = std::count(draws.addresses.begin(), draws.addresses.end(), target);
  const double seconds = clock.seconds();
  const bool passed = first >= 10 * last && matches >= 90 && seconds < 300.0;
  return {passed, format("loss %.4g -> %.4g (%.1fx) in 500 steps; %ld/100 draws decode to %s; %.0fs", first, last,
                         first / last, static_cast<long>(matches), format_address(target).c_str(), seconds)};
}

Outcome synthetic_end_to_end() {
  const Stopwatch clock;
  auto config = desk_profile();
  config.paths.out_dir = fs::temp_directory_path() / "sixdiff_acceptance_demo";
  fs::create_directories(config.paths.out_dir);
  std::ostringstream log;
  const auto result = cmd_demo_synthetic(config, log);
  const auto& c = result.report.counts;
  const double seconds = clock.seconds();
  const bool passed = c.n_candidate > 0 && result.report.hit_rate >= 10 * result.baseline_hit_rate &&
                      result.report.generation_rate > 0 && seconds < 1800.0;
  return {passed, format("hit rate %.4f vs baseline %.6f; generation rate %.4f (%zu active non-seeds of %zu); %.0fs",
                         result.report.hit_rate, result.baseline_hit_rate, result.report.generation_rate,
                         c.n_hit - c.n_repeat, c.n_candidate, seconds)};
}

Outcome alias_protocol() {
  UniverseConfig ucfg;
  ucfg.alias_regions = 6;
  const auto universe = build_universe(ucfg, 1010);
  OracleProber oracle(universe);
  std::mt19937_64 rng(11);
  auto actives = universe.enumerate_active();
  std::erase_if(actives, [&](const Ipv6Address& a) { return universe.in_alias_region(a); });

  std::vector<Ipv6Address> candidates;
  std::size_t alias_planted = 0;
  for (const auto& region : universe.alias_regions()) {
    for (int i = 0; i < 50; ++i, ++alias_planted) {
      candidates.emplace_back(region.bits().high(), region.bits().low() | (rng() >> 32));
    }
  }
  for (int i = 0; i < 300; ++i) candidates.push_back(actives[rng() % actives.size()]);
  for (int i = 0; i < 300; ++i) candidates.emplace_back(rng(), rng());

  CountingProber counter(oracle);
  const auto result = dealias(candidates, AliasPrefixSet{}, counter, rng);
  std::size_t leaked = 0;
  for (const auto& a : result.clean) leaked += universe.in_alias_region(a);
  bool exact_budget = counter.probes() == 16 * result.report.unique_count;
  for (const auto& v : result.report.verdicts) exact_budget = exact_budget && v.probes_used == 16;

  std::size_t removed_actives = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& a = actives[rng() % actives.size()];
    removed_actives += classify_fine(a, oracle, rng).is_alias;
  }
  const bool passed = universe.alias_regions().size() >= 4 && leaked == 0 && exact_budget && removed_actives == 0;
  return {passed, format("%zu alias regions; %zu planted aliases, %zu leaked; %zu probes for %zu fine candidates; "
                         "%zu of 1000 active non-aliases removed",
                         universe.alias_regions().size(), alias_planted, leaked, counter.probes(),
                         result.report.unique_count, removed_actives)};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(1111);
  const std::vector<int> lengths = {32, 48, 64, 80};
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = testing_support::random_metric_instance(rng);
    const SeedSet seeds(in.seeds);
    const EvaluationInput input(in.candidates, seeds, in.active, in.alias);
    const auto brute =
        testing_support::brute_force_metrics(in.candidates, seeds.addresses(), in.active, in.alias, lengths);
    bool same = hit_rate(input) == brute.hit && generation_rate(input) == brute.gen &&
                nonalias_rate(input) == brute.nonalias;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      same = same && candidate_new_prefix_rate(input, lengths[k]).ratio == brute.cn_pre[k] &&
             generation_new_prefix_rate(input, lengths[k]).ratio == brute.gn_pre[k];
    }
    if (!same) return {false, format("instance %d (%zu candidates) differs", trial, in.candidates.size())};
  }
  return {true, "100 random instances match brute-force set algebra exactly"};
}

Outcome codec_round_trips() {
  const auto doc = parse_address("2001:0db8:85a3:0000:0000:8a2e:0370:7334");
  const auto doc_nybbles = to_nybbles(doc);
  const bool vector_ok = doc.high() == 0x20010db885a30000ULL && doc.low() == 0x00008a2e03707334ULL &&
                         format_address(doc) == "2001:db8:85a3::8a2e:370:7334" &&
                         to_word_address(doc_nybbles) ==
                             "2 0 0 1 0 d b 8 8 5 a 3 0 0 0 0 0 0 0 0 8 a 2 e 0 3 7 0 7 3 3 4" &&
                         from_nybbles(doc_nybbles) == doc;
  if (!vector_ok) return {false, "documentation vector does not round-trip"};
  std::mt19937_64 rng(1212);
  for (int i = 0; i < 100000; ++i) {
    // Odd draws zero random groups so "::" compression is exercised.
    std::uint64_t hi = rng(), lo = rng();
    if (i % 2) {
      const auto keep = rng();
      for (int g = 0; g < 4; ++g) {
        if (keep >> g & 1) hi &= ~(0xFFFFULL << (16 * g));
        if (keep >> (g + 4) & 1) lo &= ~(0xFFFFULL << (16 * g));
      }
    }
    const Ipv6Address a(hi, lo);
    const auto text = format_address(a);
    const auto n = to_nybbles(a);
    if (parse_address(text) != a || from_nybbles(n) != a || parse_word_address(to_word_address(n)) != n) {
      return {false, "round trip failed for " + text};
    }
  }
  return {true, "documentation vector plus 100000 random addresses round-trip exactly"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sixdiff acceptance suite"};
  std::vector<int> selected;
  app.add_option("criteria", selected, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "published table arithmetic", published_arithmetic},
      {2, "mask oracles", mask_oracles},
      {3, "attention causality and isolation", causality_isolation},
      {4, "vanilla attention equivalence", vanilla_equivalence},
      {5, "full-model gradient check", gradient_check},
      {6, "noise schedule properties", schedule_properties},
      {7, "DDIM algebra", ddim_algebra},
      {8, "singleton overfit", singleton_overfit},
      {9, "synthetic end-to-end", synthetic_end_to_end},
      {10, "alias protocol", alias_protocol},
      {11, "metric oracle equivalence", metric_oracle},
      {12, "codec round trips", codec_round_trips},
  };
  if (selected.empty()) {
    for (const auto& c : criteria) selected.push_back(c.id);
  }

  bool all = true;
  for (int id : selected) {
    const auto& c = criteria[static_cast<std::size_t>(id - 1)];
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    all = all && outcome.passed;
    std::cout << "criterion " << c.id << " [" << (outcome.passed ? "PASS" : "FAIL") << "] " << c.name << ": "
              << outcome.detail << std::endl;
  }
  return all ? 0 : 1;
}

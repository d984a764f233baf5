#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "sixdiff/errors.hpp"
#include "sixdiff/metrics.hpp"
#include "test_support.hpp"

using namespace sixdiff;

TEST(Metrics, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(1234);
  const std::vector<int> lengths = {32, 48, 64, 80};
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = testing_support::random_metric_instance(rng);
    const SeedSet seeds(in.seeds);
    const EvaluationInput input(in.candidates, seeds, in.active, in.alias);
    const auto brute = testing_support::brute_force_metrics(in.candidates, seeds.addresses(), in.active, in.alias,
                                                            lengths);
    ASSERT_EQ(hit_rate(input), brute.hit);
    ASSERT_EQ(generation_rate(input), brute.gen);
    ASSERT_EQ(nonalias_rate(input), brute.nonalias);
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      ASSERT_EQ(candidate_new_prefix_rate(input, lengths[k]).ratio, brute.cn_pre[k]);
      ASSERT_EQ(generation_new_prefix_rate(input, lengths[k]).ratio, brute.gn_pre[k]);
    }
    const auto report = full_report(input);
    ASSERT_LE(report.generation_rate, report.hit_rate);
    ASSERT_EQ(report.generation_rate == report.hit_rate, report.counts.n_repeat == 0);
    for (std::size_t k = 1; k < report.prefixes.size(); ++k) {
      ASSERT_LE(report.prefixes[k - 1].candidate.prefixes, report.prefixes[k].candidate.prefixes);
    }
    for (const auto& p : report.prefixes) ASSERT_EQ(p.candidate.per10k, p.candidate.ratio * 10000);
  }
}

TEST(Metrics, TrivialCases) {
  const std::vector<Ipv6Address> c = {Ipv6Address(1, 1), Ipv6Address(1, 2)};
  const SeedSet seeds(c);
  const EvaluationInput all_seeds(c, seeds, {true, true}, {false, false});
  EXPECT_EQ(hit_rate(all_seeds), 1.0);
  EXPECT_EQ(generation_rate(all_seeds), 0.0);
  EXPECT_EQ(nonalias_rate(all_seeds), 1.0);
  EXPECT_EQ(candidate_new_prefix_rate(all_seeds, 64).ratio, 0.0);
  const SeedSet no_seeds;
  const EvaluationInput none(c, no_seeds, {false, false}, {false, false});
  EXPECT_EQ(hit_rate(none), 0.0);
  EXPECT_EQ(generation_new_prefix_rate(none, 32).ratio, 0.0);
}

TEST(Metrics, InputValidation) {
  const std::vector<Ipv6Address> c = {Ipv6Address(1, 1)};
  const SeedSet no_seeds;
  EXPECT_THROW(EvaluationInput(c, no_seeds, {true, false}, {false}), ShapeMismatch);
  const std::vector<Ipv6Address> dup = {Ipv6Address(1, 1), Ipv6Address(1, 1)};
  EXPECT_THROW(EvaluationInput(dup, no_seeds, {true, true}, {false, false}), InvalidConfig);
  const EvaluationInput empty({}, no_seeds, {}, {});
  EXPECT_THROW(hit_rate(empty), EmptyCandidateSet);
  EXPECT_THROW(report_from_counts(MetricCounts{}), EmptyCandidateSet);
}

TEST(PublishedCounts, HeadlineRates) {
  const auto r = report_from_counts(testing_support::published_counts(95092));
  EXPECT_NEAR(100 * r.hit_rate, 46.73, 0.01);
  EXPECT_NEAR(100 * r.generation_rate, 46.66, 0.01);
  EXPECT_NEAR(100 * r.nonalias_rate, 93.10, 0.01);
  EXPECT_NEAR(r.prefixes[0].candidate.per10k, 343.45, 0.01);
  EXPECT_NEAR(r.prefixes[0].generation.per10k, 13.78, 0.01);
  EXPECT_EQ(r.counts.n_hit - r.counts.n_repeat, 44372u);
}

TEST(PublishedCounts, FixtureFileRoundTrip) {
  std::istringstream in(
      "# headline\nn_candidate = 95092\nn_hit = 44435\nn_gen = 44372\nn_nonaliased = 88528\n"
      "prefix.32.c_pre = 4104\nprefix.32.cn_pre = 3266\nprefix.32.g_pre = 310\nprefix.32.gn_pre = 131\n");
  const auto counts = read_counts(in);
  EXPECT_EQ(counts.n_repeat, 63u);
  EXPECT_EQ(counts.n_aliased, 95092u - 88528u);
  ASSERT_EQ(counts.prefixes.size(), 1u);
  EXPECT_EQ(counts.prefixes[0].generated_new_prefixes, 131u);

  std::istringstream bad("n_candidate = 10\nmystery = 3\n");
  EXPECT_THROW(read_counts(bad), InvalidConfig);
}

TEST(Report, TsvSchema) {
  const auto r = report_from_counts(testing_support::published_counts(95092));
  std::ostringstream out;
  write_report_tsv(out, r);
  std::istringstream lines(out.str());
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "metric\tprefix_length\tnumerator\tdenominator\tratio\tper10k");
  std::string line;
  bool saw = false;
  while (std::getline(lines, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 5) << line;
    if (line.rfind("r_cn_pre\t64\t", 0) == 0) {
      saw = true;
      EXPECT_NE(line.find("\t89538\t95092\t0.9416\t9415.93"), std::string::npos) << line;
    }
  }
  EXPECT_TRUE(saw);
  std::ostringstream text;
  write_report_text(text, r);
  EXPECT_NE(text.str().find("46.73"), std::string::npos);
}

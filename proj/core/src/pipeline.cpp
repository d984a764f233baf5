#include "sixdiff/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_set>

#include "sixdiff/alias_resolver.hpp"
#include "sixdiff/checkpoint.hpp"
#include "sixdiff/errors.hpp"
#include "sixdiff/sampler.hpp"
#include "sixdiff/seed_corpus.hpp"
#include "sixdiff/trainer.hpp"

namespace sixdiff {

namespace fs = std::filesystem;

namespace {

fs::path or_default(const fs::path& configured, const fs::path& fallback) {
  return configured.empty() ? fallback : configured;
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw InvalidConfig(std::string(what) + " path is not set");
  if (!fs::is_regular_file(path)) throw InvalidConfig(std::string(what) + " not found: " + path.string());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidConfig("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path, const char* what) {
  require_file(path, what);
  std::ifstream in(path);
  if (!in) throw InvalidConfig(std::string("cannot read ") + what + " " + path.string());
  return in;
}

SeedSet read_seeds(const fs::path& path, std::ostream& progress) {
  auto in = open_input(path, "seed file");
  auto loaded = load_seed_set(in);
  if (!loaded.rejects.empty()) {
    progress << "seeds: skipped " << loaded.rejects.size() << " malformed line(s) in " << path.string() << '\n';
  }
  return std::move(loaded.seeds);
}

std::vector<Ipv6Address> read_addresses(const fs::path& path, const char* what) {
  auto in = open_input(path, what);
  return read_address_list(in);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

DenoiserModel train_and_save(const PipelineConfig& config, const SeedSet& seeds, const OutputLayout& layout,
                             std::ostream& progress) {
  DenoiserModel model(config.model, config.train.rng_seed);
  const auto schedule = config.schedule.build();
  auto log = open_output(layout.train_log);
  log << "step\tnoise_mse\trounding_loss\ttotal\n";
  const int cadence = std::max(1, config.train.steps / 20);
  const auto start = std::chrono::steady_clock::now();
  progress << "train: " << seeds.size() << " seeds, " << model.parameter_count() << " parameters, "
           << config.train.steps << " steps\n";

  TrainHooks hooks;
  hooks.on_step = [&](int step, const LossBreakdown& loss) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d\t%.9g\t%.9g\t%.9g\n", step, loss.noise_mse, loss.rounding_loss, loss.total);
    log << line;
    if (step % cadence == 0 || step == config.train.steps) {
      std::snprintf(line, sizeof(line), "train: step %d/%d total %.5f (mse %.5f, rounding %.5f) %.1fs\n", step,
                    config.train.steps, loss.total, loss.noise_mse, loss.rounding_loss, seconds_since(start));
      progress << line;
    }
  };
  hooks.on_checkpoint = [&](int step, const DenoiserModel& m) {
    if (step == config.train.steps) {
      save_checkpoint(layout.checkpoint, m);
    } else {
      auto path = layout.checkpoint;
      path += ".step" + std::to_string(step);
      save_checkpoint(path, m);
    }
  };
  train(model, schedule, config.train, seeds, hooks);
  progress << "train: checkpoint written to " << layout.checkpoint.string() << '\n';
  return model;
}

CandidateSet generate_and_save(const PipelineConfig& config, const DenoiserModel& model, const OutputLayout& layout,
                               const fs::path& checkpoint, std::ostream& progress) {
  const auto schedule = config.schedule.build();
  const auto start = std::chrono::steady_clock::now();
  progress << "generate: " << config.sampler.count << " candidates, "
           << rescale_timesteps(schedule.steps(), config.sampler.stride).size() - 1 << " denoising steps\n";
  auto candidates = generate(model, schedule, config.sampler);
  {
    auto out = open_output(layout.raw_candidates);
    write_target_list(out, candidates.addresses);
  }
  const auto unique = candidates.deduplicated().size();
  auto manifest = open_output(layout.manifest);
  manifest << "# run_id = " << candidates.run_id << '\n';
  manifest << "# checkpoint = " << checkpoint.string() << '\n';
  manifest << "# raw_count = " << candidates.addresses.size() << '\n';
  manifest << "# unique_count = " << unique << '\n';
  write_config(manifest, config);
  char line[128];
  std::snprintf(line, sizeof(line), "generate: %zu unique of %zu in %.1fs\n", unique, candidates.addresses.size(),
                seconds_since(start));
  progress << line;
  return candidates;
}

DealiasResult dealias_and_save(const PipelineConfig& config, std::span<const Ipv6Address> candidates,
                               const AliasPrefixSet& aliases, Prober& prober, const OutputLayout& layout,
                               std::ostream& progress) {
  std::mt19937_64 rng(config.dealias_seed);
  auto result = dealias(candidates, aliases, prober, rng, config.dealias_prefix_length);
  {
    auto out = open_output(layout.clean_candidates);
    write_target_list(out, result.clean);
  }
  auto report = open_output(layout.alias_report);
  write_alias_report(report, result.report);
  const auto& r = result.report;
  progress << "dealias: " << r.unique_count << " unique, " << r.coarse_alias_count << " coarse alias, "
           << r.fine_alias_count << " fine alias, " << r.probes_issued << " probes\n";
  return result;
}

MetricsReport evaluate_and_save(const PipelineConfig& config, std::span<const Ipv6Address> raw,
                                std::span<const Ipv6Address> clean, const SeedSet& seeds, Prober& prober,
                                const OutputLayout& layout, std::ostream& progress) {
  std::vector<Ipv6Address> unique;
  std::unordered_set<Ipv6Address> seen;
  for (const auto& a : raw) {
    if (seen.insert(a).second) unique.push_back(a);
  }
  const std::unordered_set<Ipv6Address> kept(clean.begin(), clean.end());
  std::vector<bool> alias(unique.size());
  for (std::size_t i = 0; i < unique.size(); ++i) alias[i] = !kept.contains(unique[i]);
  auto active = prober.probe_batch(unique);
  if (active.size() != unique.size()) throw ProberUnavailable("prober returned a misaligned verdict list");
  for (std::size_t i = 0; i < unique.size(); ++i) active[i] = active[i] && !alias[i];

  EvaluationInput input(std::move(unique), seeds, std::move(active), std::move(alias));
  auto report = full_report(input, config.prefix_lengths);
  {
    auto out = open_output(layout.metrics_tsv);
    write_report_tsv(out, report);
  }
  auto text = open_output(layout.metrics_text);
  write_report_text(text, report);
  char line[160];
  std::snprintf(line, sizeof(line), "evaluate: r_hit %.4f r_gen %.4f r_nonaliased %.4f over %zu candidates\n",
                report.hit_rate, report.generation_rate, report.nonalias_rate, report.counts.n_candidate);
  progress << line;
  return report;
}

AliasPrefixSet configured_aliases(const PipelineConfig& config) {
  if (config.paths.alias_prefixes.empty()) return {};
  auto in = open_input(config.paths.alias_prefixes, "alias prefix file");
  return load_alias_prefixes(in);
}

}  // namespace

OutputLayout::OutputLayout(const PipelineConfig& config) {
  const auto& p = config.paths;
  const auto& dir = p.out_dir;
  canonical_seeds = dir / "seeds.txt";
  rejects = dir / "preprocess_rejects.tsv";
  preprocess_stats = dir / "preprocess_stats.txt";
  train_log = dir / "train_log.tsv";
  checkpoint = or_default(p.checkpoint, dir / "model.ckpt");
  raw_candidates = or_default(p.candidates, dir / "candidates.raw.txt");
  manifest = dir / "generate_manifest.txt";
  clean_candidates = or_default(p.clean_candidates, dir / "candidates.clean.txt");
  alias_report = dir / "alias_report.tsv";
  metrics_tsv = dir / "metrics.tsv";
  metrics_text = dir / "metrics.txt";
  universe = dir / "universe.txt";
  scan_targets = dir / "scan_targets.txt";
  demo_summary = dir / "demo_summary.txt";
}

ProberHandle::ProberHandle(const PipelineConfig& config) {
  if (config.prober == "file") {
    require_file(config.paths.scan_results, "scan result file");
    prober_ = std::make_unique<ResultFileProber>(config.paths.scan_results, OutputLayout(config).scan_targets);
    return;
  }
  if (config.prober != "oracle") throw InvalidConfig("unknown prober '" + config.prober + "'");
  if (!config.paths.universe.empty()) {
    auto in = open_input(config.paths.universe, "universe file");
    universe_ = restore_universe(in);
  } else {
    universe_ = build_universe(config.universe, config.universe_seed);
  }
  prober_ = std::make_unique<OracleProber>(*universe_);
}

PreprocessSummary cmd_preprocess(const PipelineConfig& config, std::ostream& progress) {
  config.validate();
  const OutputLayout layout(config);
  auto in = open_input(config.paths.seeds, "seed file");
  auto loaded = load_seed_set(in);

  PreprocessSummary summary;
  summary.lines_read = loaded.lines_read;
  summary.rejected = loaded.rejects.size();
  summary.duplicates = loaded.duplicates;
  SeedSet seeds = std::move(loaded.seeds);
  if (config.prescan) {
    ProberHandle prober(config);
    const auto before = seeds.size();
    seeds = prescan_seeds(seeds, prober.get());
    summary.inactive_dropped = before - seeds.size();
    if (seeds.empty()) throw EmptyCorpus("no seed survived the prescan");
  }
  summary.kept = seeds.size();

  {
    auto out = open_output(layout.canonical_seeds);
    write_seed_set(out, seeds);
  }
  {
    auto out = open_output(layout.rejects);
    out << "line\treason\ttext\n";
    for (const auto& r : loaded.rejects) out << r.line_number << '\t' << r.reason << '\t' << r.text << '\n';
  }
  auto stats = open_output(layout.preprocess_stats);
  stats << "lines_read = " << summary.lines_read << '\n'
        << "rejected = " << summary.rejected << '\n'
        << "duplicates = " << summary.duplicates << '\n'
        << "inactive_dropped = " << summary.inactive_dropped << '\n'
        << "kept = " << summary.kept << '\n';
  progress << "preprocess: kept " << summary.kept << " of " << summary.lines_read << " lines (" << summary.rejected
           << " rejected, " << summary.duplicates << " duplicates, " << summary.inactive_dropped
           << " inactive)\n";
  return summary;
}

void cmd_train(const PipelineConfig& config, std::ostream& progress) {
  config.validate();
  const OutputLayout layout(config);
  const auto seeds_path = or_default(config.paths.seeds, layout.canonical_seeds);
  require_file(seeds_path, "seed file");
  const auto seeds = read_seeds(seeds_path, progress);
  train_and_save(config, seeds, layout, progress);
}

void cmd_generate(const PipelineConfig& config, std::ostream& progress) {
  config.validate();
  const OutputLayout layout(config);
  require_file(layout.checkpoint, "checkpoint");
  const auto model = load_checkpoint(layout.checkpoint);
  generate_and_save(config, model, layout, layout.checkpoint, progress);
}

DealiasReport cmd_dealias(const PipelineConfig& config, std::ostream& progress) {
  config.validate();
  const OutputLayout layout(config);
  require_file(layout.raw_candidates, "candidate file");
  const auto aliases = configured_aliases(config);
  ProberHandle prober(config);
  const auto candidates = read_addresses(layout.raw_candidates, "candidate file");
  return dealias_and_save(config, candidates, aliases, prober.get(), layout, progress).report;
}

MetricsReport cmd_evaluate(const PipelineConfig& config, std::ostream& progress, const fs::path& counts_fixture) {
  config.validate();
  const OutputLayout layout(config);
  if (!counts_fixture.empty()) {
    auto in = open_input(counts_fixture, "counts fixture");
    auto report = report_from_counts(read_counts(in));
    {
      auto out = open_output(layout.metrics_tsv);
      write_report_tsv(out, report);
    }
    auto text = open_output(layout.metrics_text);
    write_report_text(text, report);
    progress << "evaluate: report written from counts in " << counts_fixture.string() << '\n';
    return report;
  }
  const auto seeds_path = or_default(config.paths.seeds, layout.canonical_seeds);
  require_file(seeds_path, "seed file");
  require_file(layout.raw_candidates, "candidate file");
  require_file(layout.clean_candidates, "clean candidate file");
  ProberHandle prober(config);
  const auto seeds = read_seeds(seeds_path, progress);
  const auto raw = read_addresses(layout.raw_candidates, "candidate file");
  const auto clean = read_addresses(layout.clean_candidates, "clean candidate file");
  return evaluate_and_save(config, raw, clean, seeds, prober.get(), layout, progress);
}

DemoResult cmd_demo_synthetic(const PipelineConfig& config, std::ostream& progress) {
  config.validate();
  const OutputLayout layout(config);
  const auto start = std::chrono::steady_clock::now();

  const auto universe = build_universe(config.universe, config.universe_seed);
  {
    auto out = open_output(layout.universe);
    dump_universe(out, universe);
  }
  progress << "demo: universe with " << universe.active_prefixes().size() << " active /64s, "
           << universe.active_count() << " active addresses, " << universe.alias_regions().size()
           << " alias regions\n";
  OracleProber oracle(universe);

  const auto seeds = sample_seeds(universe, config.demo.seed_count, config.seed_sample_seed);
  {
    auto out = open_output(layout.canonical_seeds);
    write_seed_set(out, seeds);
  }

  const auto model = train_and_save(config, seeds, layout, progress);
  const auto candidates = generate_and_save(config, model, layout, layout.checkpoint, progress);

  // Only half the alias regions are known up front; the rest must be found by probing.
  AliasPrefixSet known;
  const auto& regions = universe.alias_regions();
  {
    auto out = open_output(layout.canonical_seeds.parent_path() / "alias_prefixes.txt");
    for (std::size_t i = 0; i < regions.size() / 2; ++i) {
      known.insert(regions[i]);
      out << format_prefix(regions[i]) << '\n';
    }
  }
  const auto dealiased = dealias_and_save(config, candidates.addresses, known, oracle, layout, progress);

  DemoResult result;
  result.report = evaluate_and_save(config, candidates.addresses, dealiased.clean, seeds, oracle, layout, progress);
  result.generated_unique = dealiased.report.unique_count;

  const auto baseline = random_baseline(universe, config.demo.baseline_count, config.baseline_seed).deduplicated();
  const auto baseline_active = oracle_probe(universe, baseline);
  std::size_t baseline_hits = 0;
  for (bool a : baseline_active) baseline_hits += a ? 1 : 0;
  result.baseline_hit_rate = baseline.empty() ? 0.0 : static_cast<double>(baseline_hits) / baseline.size();

  const auto& c = result.report.counts;
  result.passed = c.n_hit > 0 && c.n_hit > c.n_repeat && result.report.hit_rate >= 10.0 * result.baseline_hit_rate;

  auto summary = open_output(layout.demo_summary);
  char line[256];
  std::snprintf(line, sizeof(line),
                "seeds = %zu\ncandidates_raw = %zu\ncandidates_unique = %zu\nhits = %zu\ngenerated = %zu\n"
                "hit_rate = %.4f\ngeneration_rate = %.4f\nnonalias_rate = %.4f\nbaseline_hit_rate = %.6f\n",
                seeds.size(), candidates.addresses.size(), c.n_candidate, c.n_hit, c.n_hit - c.n_repeat,
                result.report.hit_rate, result.report.generation_rate, result.report.nonalias_rate,
                result.baseline_hit_rate);
  summary << line << "result = " << (result.passed ? "PASS" : "FAIL") << '\n';
  std::snprintf(line, sizeof(line), "demo: %s hit %.4f vs baseline %.6f, %zu new active, %.1fs total\n",
                result.passed ? "PASS" : "FAIL", result.report.hit_rate, result.baseline_hit_rate,
                c.n_hit - c.n_repeat, seconds_since(start));
  progress << line;
  return result;
}

}  // namespace sixdiff

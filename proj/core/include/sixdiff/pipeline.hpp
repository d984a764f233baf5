#pragma once

// Pipeline stages behind the command-line driver. Each stage reads its inputs
// from disk, writes its outputs under config.paths.out_dir, and prints
// progress to `progress`.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>

#include "sixdiff/alias_resolver.hpp"
#include "sixdiff/config.hpp"
#include "sixdiff/metrics.hpp"
#include "sixdiff/prober.hpp"
#include "sixdiff/synthetic_universe.hpp"

namespace sixdiff {

/// Default file names under out_dir, used when the matching path is unset.
struct OutputLayout {
  explicit OutputLayout(const PipelineConfig& config);

  std::filesystem::path canonical_seeds;
  std::filesystem::path rejects;
  std::filesystem::path preprocess_stats;
  std::filesystem::path train_log;
  std::filesystem::path checkpoint;
  std::filesystem::path raw_candidates;
  std::filesystem::path manifest;
  std::filesystem::path clean_candidates;
  std::filesystem::path alias_report;
  std::filesystem::path metrics_tsv;
  std::filesystem::path metrics_text;
  std::filesystem::path universe;
  std::filesystem::path scan_targets;
  std::filesystem::path demo_summary;
};

/// Prober selected by config.prober. The oracle prober reads paths.universe
/// when set and otherwise builds the universe from the config.
class ProberHandle {
 public:
  explicit ProberHandle(const PipelineConfig& config);
  Prober& get() { return *prober_; }
  const SyntheticUniverse* universe() const { return universe_ ? &*universe_ : nullptr; }

 private:
  std::optional<SyntheticUniverse> universe_;
  std::unique_ptr<Prober> prober_;
};

struct PreprocessSummary {
  std::size_t lines_read = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  std::size_t kept = 0;
  std::size_t inactive_dropped = 0;
};

PreprocessSummary cmd_preprocess(const PipelineConfig& config, std::ostream& progress);
void cmd_train(const PipelineConfig& config, std::ostream& progress);
void cmd_generate(const PipelineConfig& config, std::ostream& progress);
DealiasReport cmd_dealias(const PipelineConfig& config, std::ostream& progress);
/// With `counts_fixture`, reports straight from published counts.
MetricsReport cmd_evaluate(const PipelineConfig& config, std::ostream& progress,
                           const std::filesystem::path& counts_fixture = {});

struct DemoResult {
  MetricsReport report;
  double baseline_hit_rate = 0.0;
  std::size_t generated_unique = 0;
  bool passed = false;
};

DemoResult cmd_demo_synthetic(const PipelineConfig& config, std::ostream& progress);

}  // namespace sixdiff

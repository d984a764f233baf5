#pragma once

// Pipeline configuration: one flat "key = value" file with dotted keys,
// layered over a named profile. Unknown keys are errors.
//
//   profile = desk            # or "full"; selects the base values
//   seed = 7                  # derives every stage seed below
//   model.d_embed = 32
//   schedule.steps = 200
//   train.steps = 2000
//   paths.seeds = data/seeds.txt

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sixdiff/denoiser.hpp"
#include "sixdiff/noise_schedule.hpp"
#include "sixdiff/sampler.hpp"
#include "sixdiff/synthetic_universe.hpp"
#include "sixdiff/trainer.hpp"

namespace sixdiff {

struct ScheduleConfig {
  int steps = 2000;
  double beta_first = 1e-6;
  double beta_last = 0.01;

  NoiseSchedule build() const { return NoiseSchedule::linear(steps, beta_first, beta_last); }
};

struct PipelinePaths {
  std::filesystem::path seeds;
  std::filesystem::path alias_prefixes;
  std::filesystem::path scan_results;  // for the file prober
  std::filesystem::path checkpoint;
  std::filesystem::path candidates;
  std::filesystem::path clean_candidates;
  std::filesystem::path universe;  // dumped universe to reuse
  std::filesystem::path out_dir = "out";
};

struct DemoConfig {
  std::size_t seed_count = 2000;
  std::size_t baseline_count = 5000;
};

struct PipelineConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;
  std::string prober = "oracle";  // "oracle" or "file"
  bool prescan = false;
  int dealias_prefix_length = 96;
  std::uint64_t dealias_seed = 1;
  std::uint64_t universe_seed = 1;
  std::uint64_t seed_sample_seed = 1;
  std::uint64_t baseline_seed = 1;
  std::vector<int> prefix_lengths = {32, 48, 64, 80};

  PipelinePaths paths;
  ModelConfig model;
  ScheduleConfig schedule;
  TrainConfig train;
  SamplerConfig sampler;
  UniverseConfig universe;
  DemoConfig demo;

  /// Throws InvalidConfig (or the owning module's config error).
  void validate() const;
};

PipelineConfig full_profile();
PipelineConfig desk_profile();
/// Throws InvalidConfig for an unknown name.
PipelineConfig profile_by_name(std::string_view name);

/// Sets `seed` and every stage seed derived from it.
void apply_seed(PipelineConfig& config, std::uint64_t seed);

/// Throws InvalidConfig for an unknown key or unparsable value.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

/// "profile" and "seed" are applied first regardless of position.
PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config(const std::filesystem::path& path);
/// Round-trips through parse_config.
void write_config(std::ostream& out, const PipelineConfig& config);

/// "32,48,64" -> {32, 48, 64}. Throws InvalidConfig.
std::vector<int> parse_int_list(std::string_view text);

}  // namespace sixdiff

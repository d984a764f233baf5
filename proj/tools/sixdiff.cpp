// Command-line driver: preprocess | train | generate | dealias | evaluate | demo.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sixdiff/config.hpp"
#include "sixdiff/errors.hpp"
#include "sixdiff/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct CommonFlags {
  std::string config_path;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count;
  std::optional<int> stride;
  std::string prefix_lengths;
  std::string prober;
  std::string out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--config", f.config_path, "Pipeline config file (key = value)")->check(CLI::ExistingFile);
  cmd.add_option("--profile", f.profile, "Base profile when no config file sets one")
      ->check(CLI::IsMember({"desk", "full"}));
  cmd.add_option("--seed", f.seed, "Master seed; derives every stage seed");
  cmd.add_option("--count", f.count, "Number of candidates to generate");
  cmd.add_option("--stride", f.stride, "DDIM skip stride");
  cmd.add_option("--prefix-lengths", f.prefix_lengths, "Comma-separated prefix lengths, e.g. 32,48,64,80");
  cmd.add_option("--prober", f.prober, "Activity source")->check(CLI::IsMember({"oracle", "file"}));
  cmd.add_option("--out-dir", f.out_dir, "Output directory");
  cmd.add_option("--set", f.overrides, "Extra override key=value (repeatable)");
}

sixdiff::PipelineConfig resolve(const CommonFlags& f) {
  auto config = f.config_path.empty() ? sixdiff::desk_profile() : sixdiff::load_config(f.config_path);
  if (!f.profile.empty()) {
    if (!f.config_path.empty()) throw sixdiff::InvalidConfig("--profile conflicts with --config; set 'profile' in the file");
    config = sixdiff::profile_by_name(f.profile);
  }
  if (f.seed) sixdiff::apply_seed(config, *f.seed);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sixdiff::InvalidConfig("--set expects key=value, got '" + kv + "'");
    sixdiff::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.count) config.sampler.count = *f.count;
  if (f.stride) config.sampler.stride = *f.stride;
  if (!f.prefix_lengths.empty()) config.prefix_lengths = sixdiff::parse_int_list(f.prefix_lengths);
  if (!f.prober.empty()) config.prober = f.prober;
  if (!f.out_dir.empty()) config.paths.out_dir = f.out_dir;
  config.validate();
  return config;
}

int exit_code(sixdiff::ErrorCategory c) {
  switch (c) {
    case sixdiff::ErrorCategory::kConfig: return kExitConfig;
    case sixdiff::ErrorCategory::kData: return kExitData;
    case sixdiff::ErrorCategory::kRuntime: return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sixdiff: diffusion-based IPv6 target generation"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string counts_path;
  bool print_config = false;

  auto* preprocess = app.add_subcommand("preprocess", "Canonicalize, dedup, and optionally prescan a seed list");
  auto* train = app.add_subcommand("train", "Train the denoiser on a seed list");
  auto* generate = app.add_subcommand("generate", "Sample candidates from a checkpoint");
  auto* dealias = app.add_subcommand("dealias", "Remove alias addresses from generated candidates");
  auto* evaluate = app.add_subcommand("evaluate", "Score candidates, or a published counts fixture");
  auto* demo = app.add_subcommand("demo", "End-to-end run against a synthetic universe");
  for (auto* cmd : {preprocess, train, generate, dealias, evaluate, demo}) add_common(*cmd, flags);
  evaluate->add_option("--counts", counts_path, "key=value counts fixture")->check(CLI::ExistingFile);
  app.add_flag("--print-config", print_config, "Print the resolved config to stdout before running");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    const auto config = resolve(flags);
    if (print_config) sixdiff::write_config(std::cout, config);
    if (*preprocess) {
      sixdiff::cmd_preprocess(config, std::cerr);
    } else if (*train) {
      sixdiff::cmd_train(config, std::cerr);
    } else if (*generate) {
      sixdiff::cmd_generate(config, std::cerr);
    } else if (*dealias) {
      sixdiff::cmd_dealias(config, std::cerr);
    } else if (*evaluate) {
      sixdiff::write_report_text(std::cout, sixdiff::cmd_evaluate(config, std::cerr, counts_path));
    } else if (*demo) {
      const auto result = sixdiff::cmd_demo_synthetic(config, std::cerr);
      return result.passed ? 0 : kExitRuntime;
    }
  } catch (const sixdiff::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

#include "sixdiff/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <utility>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw InvalidConfig("'" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InvalidConfig("'" + std::string(key) + "': expected true/false, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

struct Field {
  std::function<void(PipelineConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <class Access>
Field number_field(Access access) {
  return {[access](PipelineConfig& c, std::string_view k, std::string_view v) {
            auto& slot = access(c);
            slot = parse_number<std::remove_reference_t<decltype(slot)>>(k, v);
          },
          [access](const PipelineConfig& c) {
            const auto& slot = access(const_cast<PipelineConfig&>(c));
            if constexpr (std::is_floating_point_v<std::remove_cvref_t<decltype(slot)>>) {
              return format_double(slot);
            } else {
              return std::to_string(slot);
            }
          }};
}

template <class Access>
Field bool_field(Access access) {
  return {[access](PipelineConfig& c, std::string_view k, std::string_view v) { access(c) = parse_bool(k, v); },
          [access](const PipelineConfig& c) {
            return std::string(access(const_cast<PipelineConfig&>(c)) ? "true" : "false");
          }};
}

template <class Access>
Field text_field(Access access) {
  return {[access](PipelineConfig& c, std::string_view, std::string_view v) { access(c) = std::string(v); },
          [access](const PipelineConfig& c) {
            return std::string(access(const_cast<PipelineConfig&>(c)));
          }};
}

template <class Access>
Field list_field(Access access) {
  return {[access](PipelineConfig& c, std::string_view, std::string_view v) { access(c) = parse_int_list(v); },
          [access](const PipelineConfig& c) { return join(access(const_cast<PipelineConfig&>(c))); }};
}

#define SIXDIFF_SLOT(expr) [](PipelineConfig& c) -> auto& { return expr; }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"prober", text_field(SIXDIFF_SLOT(c.prober))},
      {"prescan", bool_field(SIXDIFF_SLOT(c.prescan))},
      {"prefix_lengths", list_field(SIXDIFF_SLOT(c.prefix_lengths))},
      {"dealias.prefix_length", number_field(SIXDIFF_SLOT(c.dealias_prefix_length))},
      {"dealias.seed", number_field(SIXDIFF_SLOT(c.dealias_seed))},
      {"paths.seeds", text_field(SIXDIFF_SLOT(c.paths.seeds))},
      {"paths.alias_prefixes", text_field(SIXDIFF_SLOT(c.paths.alias_prefixes))},
      {"paths.scan_results", text_field(SIXDIFF_SLOT(c.paths.scan_results))},
      {"paths.checkpoint", text_field(SIXDIFF_SLOT(c.paths.checkpoint))},
      {"paths.candidates", text_field(SIXDIFF_SLOT(c.paths.candidates))},
      {"paths.clean_candidates", text_field(SIXDIFF_SLOT(c.paths.clean_candidates))},
      {"paths.universe", text_field(SIXDIFF_SLOT(c.paths.universe))},
      {"paths.out_dir", text_field(SIXDIFF_SLOT(c.paths.out_dir))},
      {"model.d_embed", number_field(SIXDIFF_SLOT(c.model.d_embed))},
      {"model.d_ff", number_field(SIXDIFF_SLOT(c.model.d_ff))},
      {"model.n_layers", number_field(SIXDIFF_SLOT(c.model.n_layers))},
      {"model.n_heads_global", number_field(SIXDIFF_SLOT(c.model.n_heads_global))},
      {"model.n_heads_local", number_field(SIXDIFF_SLOT(c.model.n_heads_local))},
      {"model.seq_len", number_field(SIXDIFF_SLOT(c.model.seq_len))},
      {"model.vocab", number_field(SIXDIFF_SLOT(c.model.vocab))},
      {"model.dropout", number_field(SIXDIFF_SLOT(c.model.dropout))},
      {"model.windows", list_field(SIXDIFF_SLOT(c.model.window_schedule))},
      {"schedule.steps", number_field(SIXDIFF_SLOT(c.schedule.steps))},
      {"schedule.beta_first", number_field(SIXDIFF_SLOT(c.schedule.beta_first))},
      {"schedule.beta_last", number_field(SIXDIFF_SLOT(c.schedule.beta_last))},
      {"train.batch_size", number_field(SIXDIFF_SLOT(c.train.batch_size))},
      {"train.learning_rate", number_field(SIXDIFF_SLOT(c.train.learning_rate))},
      {"train.steps", number_field(SIXDIFF_SLOT(c.train.steps))},
      {"train.seed", number_field(SIXDIFF_SLOT(c.train.rng_seed))},
      {"train.rounding_weight", number_field(SIXDIFF_SLOT(c.train.rounding_weight))},
      {"train.grad_clip", number_field(SIXDIFF_SLOT(c.train.grad_clip))},
      {"train.freeze_embeddings", bool_field(SIXDIFF_SLOT(c.train.freeze_embeddings))},
      {"train.checkpoint_every", number_field(SIXDIFF_SLOT(c.train.checkpoint_every))},
      {"train.adam_beta1", number_field(SIXDIFF_SLOT(c.train.adam_beta1))},
      {"train.adam_beta2", number_field(SIXDIFF_SLOT(c.train.adam_beta2))},
      {"train.adam_epsilon", number_field(SIXDIFF_SLOT(c.train.adam_epsilon))},
      {"sampler.stride", number_field(SIXDIFF_SLOT(c.sampler.stride))},
      {"sampler.count", number_field(SIXDIFF_SLOT(c.sampler.count))},
      {"sampler.seed", number_field(SIXDIFF_SLOT(c.sampler.rng_seed))},
      {"sampler.batch_size", number_field(SIXDIFF_SLOT(c.sampler.batch_size))},
      {"sampler.threads", number_field(SIXDIFF_SLOT(c.sampler.threads))},
      {"universe.seed", number_field(SIXDIFF_SLOT(c.universe_seed))},
      {"universe.slash32_count", number_field(SIXDIFF_SLOT(c.universe.slash32_count))},
      {"universe.slash48_per_32", number_field(SIXDIFF_SLOT(c.universe.slash48_per_32))},
      {"universe.active_prefixes", number_field(SIXDIFF_SLOT(c.universe.active_prefixes))},
      {"universe.alias_regions", number_field(SIXDIFF_SLOT(c.universe.alias_regions))},
      {"universe.min_pattern_size", number_field(SIXDIFF_SLOT(c.universe.min_pattern_size))},
      {"universe.max_pattern_size", number_field(SIXDIFF_SLOT(c.universe.max_pattern_size))},
      {"demo.seed_count", number_field(SIXDIFF_SLOT(c.demo.seed_count))},
      {"demo.seed_sample_seed", number_field(SIXDIFF_SLOT(c.seed_sample_seed))},
      {"demo.baseline_count", number_field(SIXDIFF_SLOT(c.demo.baseline_count))},
      {"demo.baseline_seed", number_field(SIXDIFF_SLOT(c.baseline_seed))},
  };
  return table;
}

#undef SIXDIFF_SLOT

}  // namespace

void PipelineConfig::validate() const {
  if (prober != "oracle" && prober != "file") throw InvalidConfig("prober must be 'oracle' or 'file', got '" + prober + "'");
  for (int l : prefix_lengths) {
    if (l < 0 || l > 128) throw InvalidConfig("prefix length " + std::to_string(l) + " outside [0, 128]");
  }
  if (prefix_lengths.empty()) throw InvalidConfig("prefix_lengths must not be empty");
  model.validate();
  (void)schedule.build();
  train.validate();
  sampler.validate();
  universe.validate();
  if (model.seq_len != kNybbleCount) throw InvalidConfig("model.seq_len must be 32 for address data");
  if (model.vocab != kNybbleVocab) throw InvalidConfig("model.vocab must be 16 for address data");
}

PipelineConfig full_profile() {
  PipelineConfig c;
  c.profile = "full";
  c.model = ModelConfig{};
  c.schedule = ScheduleConfig{};
  c.train = TrainConfig{};
  c.train.steps = 20000;
  c.sampler.stride = 5;
  c.sampler.count = 100000;
  apply_seed(c, 1);
  return c;
}

PipelineConfig desk_profile() {
  PipelineConfig c;
  c.profile = "desk";
  c.model.d_embed = 32;
  c.model.d_ff = 128;
  c.model.n_layers = 4;
  c.model.window_schedule = {4, 8, 16, 32};
  c.model.dropout = 0.1;
  c.schedule = {200, 1e-5, 0.1};
  c.train.batch_size = 64;
  c.train.learning_rate = 1e-3;
  c.train.steps = 2000;
  c.sampler.stride = 5;
  c.sampler.count = 5000;
  apply_seed(c, 1);
  return c;
}

PipelineConfig profile_by_name(std::string_view name) {
  if (name == "desk") return desk_profile();
  if (name == "full") return full_profile();
  throw InvalidConfig("unknown profile '" + std::string(name) + "'");
}

void apply_seed(PipelineConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.universe_seed = seed;
  c.seed_sample_seed = seed + 1;
  c.train.rng_seed = seed + 2;
  c.sampler.rng_seed = seed + 3;
  c.baseline_seed = seed + 4;
  c.dealias_seed = seed + 5;
}

void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value) {
  if (key == "profile") {
    config = profile_by_name(value);
    return;
  }
  if (key == "seed") {
    apply_seed(config, parse_number<std::uint64_t>(key, value));
    return;
  }
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, key, value);
      return;
    }
  }
  throw InvalidConfig("unknown key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidConfig("config line " + std::to_string(line_number) + ": expected 'key = value'");
    }
    entries.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }

  PipelineConfig config = desk_profile();
  for (const char* first : {"profile", "seed"}) {
    for (const auto& [k, v] : entries) {
      if (k == first) apply_setting(config, k, v);
    }
  }
  for (const auto& [k, v] : entries) {
    if (k != "profile" && k != "seed") apply_setting(config, k, v);
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const PipelineConfig& config) {
  out << "profile = " << config.profile << '\n';
  out << "seed = " << config.seed << '\n';
  for (const auto& [name, field] : fields()) out << name << " = " << field.get(config) << '\n';
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  text = trim(text);
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    out.push_back(parse_number<int>("list", item));
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  if (out.empty()) throw InvalidConfig("empty integer list");
  return out;
}

}  // namespace sixdiff

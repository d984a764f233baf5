#include "sixdiff/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_set>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string run_identifier(const SamplerConfig& c) {
  return "seed" + std::to_string(c.rng_seed) + "-stride" + std::to_string(c.stride) + "-m" + std::to_string(c.count);
}

}  // namespace

void SamplerConfig::validate() const {
  if (stride < 1) throw InvalidStride("stride must be >= 1, got " + std::to_string(stride));
  if (count < 1) throw InvalidConfig("count must be >= 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (threads < 1) throw InvalidConfig("threads must be >= 1");
}

std::vector<Ipv6Address> CandidateSet::deduplicated() const {
  std::unordered_set<Ipv6Address> seen;
  std::vector<Ipv6Address> out;
  out.reserve(addresses.size());
  for (const auto& a : addresses) {
    if (seen.insert(a).second) out.push_back(a);
  }
  return out;
}

std::vector<int> rescale_timesteps(int steps, int stride) {
  if (stride < 1) throw InvalidStride("stride must be >= 1, got " + std::to_string(stride));
  if (steps < 1) throw InvalidStride("step count must be >= 1");
  std::vector<int> seq;
  seq.reserve(steps / stride + 2);
  for (int t = steps; t > 0; t -= stride) seq.push_back(t);
  seq.push_back(0);
  return seq;
}

Matrix estimate_x0(const Matrix& x_t, const Matrix& eps_hat, int t, const NoiseSchedule& schedule) {
  if (t < 1) throw StepOutOfRange("estimate_x0 requires t >= 1");
  if (x_t.rows() != eps_hat.rows() || x_t.cols() != eps_hat.cols()) throw ShapeMismatch("x_t and eps differ in shape");
  const double ab = schedule.alpha_bar(t);
  return (x_t - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

Matrix ddim_update(const Matrix& x_t, const Matrix& eps_hat, int t, int t_prev, const NoiseSchedule& schedule) {
  if (t_prev >= t || t_prev < 0) {
    throw StepOutOfRange("need 0 <= t_prev < t, got t=" + std::to_string(t) + " t_prev=" + std::to_string(t_prev));
  }
  Matrix x0_hat = estimate_x0(x_t, eps_hat, t, schedule);
  if (t_prev == 0) return x0_hat;
  const double ab_prev = schedule.alpha_bar(t_prev);
  return std::sqrt(ab_prev) * x0_hat + std::sqrt(1.0 - ab_prev) * eps_hat;
}

Matrix ddim_step(const Matrix& x_t, int t, int t_prev, const DenoiserModel& model, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) throw StepOutOfRange("step " + std::to_string(t) + " out of range");
  return ddim_update(x_t, predict_noise(model, x_t, t), t, t_prev, schedule);
}

std::vector<std::uint8_t> denoise_to_tokens(const Matrix& x_T, const DenoiserModel& model,
                                            const NoiseSchedule& schedule, int stride) {
  const auto timesteps = rescale_timesteps(schedule.steps(), stride);
  Matrix x = x_T;
  for (std::size_t k = 0; k + 1 < timesteps.size(); ++k) {
    x = ddim_step(x, timesteps[k], timesteps[k + 1], model, schedule);
  }
  return decode_tokens(model, x);
}

CandidateSet generate(const DenoiserModel& model, const NoiseSchedule& schedule, const SamplerConfig& config) {
  config.validate();
  const auto& cfg = model.config();
  if (cfg.seq_len != kNybbleCount) throw InvalidConfig("address generation requires seq_len = 32");

  const std::size_t batches = (config.count + config.batch_size - 1) / config.batch_size;
  CandidateSet out;
  out.run_id = run_identifier(config);
  out.addresses.resize(config.count);

  auto run_batch = [&](std::size_t b) {
    const std::size_t first = b * config.batch_size;
    const std::size_t n = std::min<std::size_t>(config.batch_size, config.count - first);
    std::mt19937_64 rng(mix(config.rng_seed ^ mix(b + 1)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x_T(static_cast<Eigen::Index>(n) * cfg.seq_len, cfg.d_embed);
    for (Eigen::Index i = 0; i < x_T.size(); ++i) x_T.data()[i] = normal(rng);
    const auto tokens = denoise_to_tokens(x_T, model, schedule, config.stride);
    for (std::size_t i = 0; i < n; ++i) {
      const auto seq = NybbleSequence::from_values(
          std::span<const std::uint8_t>(tokens).subspan(i * kNybbleCount, kNybbleCount));
      out.addresses[first + i] = from_nybbles(seq);
    }
  };

  const int workers = std::min<int>(config.threads, static_cast<int>(batches));
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          try {
            for (std::size_t b = next++; b < batches; b = next++) run_batch(b);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = batches;
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return out;
}

}  // namespace sixdiff

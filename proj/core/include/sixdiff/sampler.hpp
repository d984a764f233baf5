#pragma once

// Deterministic skip-step (DDIM, eta = 0) candidate generation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sixdiff/address.hpp"
#include "sixdiff/denoiser.hpp"
#include "sixdiff/noise_schedule.hpp"

namespace sixdiff {

struct SamplerConfig {
  int stride = 5;
  std::size_t count = 1000;
  std::uint64_t rng_seed = 1;
  int batch_size = 256;
  /// Worker threads; batches are independent so the output does not depend on this.
  int threads = 1;

  void validate() const;
};

struct CandidateSet {
  std::vector<Ipv6Address> addresses;  // raw generation order, duplicates kept
  std::string run_id;

  /// First occurrence of each address, order preserved.
  std::vector<Ipv6Address> deduplicated() const;
};

/// Descending steps T, T - stride, ..., 0. When stride does not divide T the
/// last hop is shorter. Throws InvalidStride for stride < 1.
std::vector<int> rescale_timesteps(int steps, int stride);

/// x0_hat = (x_t - sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_bar_t).
Matrix estimate_x0(const Matrix& x_t, const Matrix& eps_hat, int t, const NoiseSchedule& schedule);

/// x_prev = sqrt(alpha_bar_prev) x0_hat + sqrt(1 - alpha_bar_prev) eps, with
/// alpha_bar_0 = 1 so t_prev = 0 returns x0_hat.
Matrix ddim_update(const Matrix& x_t, const Matrix& eps_hat, int t, int t_prev, const NoiseSchedule& schedule);

/// Predicts the noise at t and applies ddim_update. `x_t` may stack several sequences.
Matrix ddim_step(const Matrix& x_t, int t, int t_prev, const DenoiserModel& model, const NoiseSchedule& schedule);

/// Runs the full reverse loop from x_T and decodes the result to nybble rows.
std::vector<std::uint8_t> denoise_to_tokens(const Matrix& x_T, const DenoiserModel& model,
                                            const NoiseSchedule& schedule, int stride);

/// Draws config.count latents from N(0, I) and denoises them. Each batch has
/// its own random stream derived from (seed, batch index).
CandidateSet generate(const DenoiserModel& model, const NoiseSchedule& schedule, const SamplerConfig& config);

}  // namespace sixdiff

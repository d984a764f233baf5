#pragma once

// Linear beta schedule and the forward-process algebra built on it.

#include <vector>

#include "sixdiff/tensor.hpp"

namespace sixdiff {

/// beta_t, alpha_t = 1 - beta_t, and alpha_bar_t = prod_{i<=t} alpha_i for
/// t = 1..T. alpha_bar(0) is defined as 1.
class NoiseSchedule {
 public:
  /// beta_t interpolates linearly from beta_first (t=1) to beta_last (t=T).
  /// Throws InvalidSchedule unless steps >= 2 and 0 < beta_first < beta_last < 1.
  static NoiseSchedule linear(int steps, double beta_first, double beta_last);

  int steps() const { return steps_; }
  double beta(int t) const;
  double alpha(int t) const;
  /// Valid for t in [0, T].
  double alpha_bar(int t) const;

  const std::vector<double>& betas() const { return beta_; }

 private:
  NoiseSchedule() = default;
  void check_step(int t, int lowest) const;

  int steps_ = 0;
  std::vector<double> beta_;       // index t-1
  std::vector<double> alpha_;      // index t-1
  std::vector<double> alpha_bar_;  // index t, alpha_bar_[0] = 1
};

/// One Markov step: sqrt(1 - beta_t) x_prev + sqrt(beta_t) noise.
Matrix forward_chain_step(const NoiseSchedule& schedule, const Matrix& x_prev, int t, const Matrix& noise);

/// Closed-form noising: sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise.
Matrix forward_sample(const NoiseSchedule& schedule, const Matrix& x0, int t, const Matrix& noise);

struct GaussianPosterior {
  Matrix mean;
  double variance = 0.0;
};

/// q(x_{t-1} | x_t, x_0) for t >= 2.
GaussianPosterior posterior_q(const NoiseSchedule& schedule, const Matrix& x0, const Matrix& xt, int t);

}  // namespace sixdiff

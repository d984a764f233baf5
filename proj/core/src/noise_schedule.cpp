#include "sixdiff/noise_schedule.hpp"

#include <cmath>
#include <string>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch("latent shapes differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

NoiseSchedule NoiseSchedule::linear(int steps, double beta_first, double beta_last) {
  if (steps < 2) throw InvalidSchedule("need at least 2 steps, got " + std::to_string(steps));
  if (!(beta_first > 0.0 && beta_first < beta_last && beta_last < 1.0)) {
    throw InvalidSchedule("require 0 < beta_first < beta_last < 1");
  }
  NoiseSchedule s;
  s.steps_ = steps;
  s.beta_.resize(steps);
  s.alpha_.resize(steps);
  s.alpha_bar_.resize(steps + 1);
  s.alpha_bar_[0] = 1.0;
  const double span = beta_last - beta_first;
  long double running = 1.0L;
  for (int t = 1; t <= steps; ++t) {
    const double b = t == steps ? beta_last : beta_first + (t - 1) * span / (steps - 1);
    s.beta_[t - 1] = b;
    s.alpha_[t - 1] = 1.0 - b;
    running *= 1.0L - static_cast<long double>(b);
    s.alpha_bar_[t] = static_cast<double>(running);
  }
  return s;
}

void NoiseSchedule::check_step(int t, int lowest) const {
  if (t < lowest || t > steps_) {
    throw StepOutOfRange("step " + std::to_string(t) + " outside [" + std::to_string(lowest) + ", " +
                         std::to_string(steps_) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_step(t, 1);
  return beta_[t - 1];
}

double NoiseSchedule::alpha(int t) const {
  check_step(t, 1);
  return alpha_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_step(t, 0);
  return alpha_bar_[t];
}

Matrix forward_chain_step(const NoiseSchedule& schedule, const Matrix& x_prev, int t, const Matrix& noise) {
  check_same_shape(x_prev, noise);
  const double b = schedule.beta(t);
  return std::sqrt(1.0 - b) * x_prev + std::sqrt(b) * noise;
}

Matrix forward_sample(const NoiseSchedule& schedule, const Matrix& x0, int t, const Matrix& noise) {
  check_same_shape(x0, noise);
  if (t < 1) throw StepOutOfRange("forward_sample requires t >= 1, got " + std::to_string(t));
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

GaussianPosterior posterior_q(const NoiseSchedule& schedule, const Matrix& x0, const Matrix& xt, int t) {
  check_same_shape(x0, xt);
  if (t < 2) throw StepOutOfRange("posterior requires t >= 2, got " + std::to_string(t));
  const double b = schedule.beta(t);
  const double a = schedule.alpha(t);
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  const double denom = 1.0 - ab;
  GaussianPosterior post;
  post.mean = (std::sqrt(ab_prev) * b / denom) * x0 + (std::sqrt(a) * (1.0 - ab_prev) / denom) * xt;
  post.variance = b * (1.0 - ab_prev) / denom;
  return post;
}

}  // namespace sixdiff

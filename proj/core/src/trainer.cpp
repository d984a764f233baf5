#include "sixdiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sixdiff/errors.hpp"

namespace sixdiff {

namespace {

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void zero(DenoiserParameters& p) {
  for (auto& t : p.tensors()) t.value->setZero();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be > 0");
  if (steps < 0) throw InvalidConfig("steps must be >= 0");
  if (rounding_weight < 0.0) throw InvalidConfig("rounding_weight must be >= 0");
  if (grad_clip < 0.0) throw InvalidConfig("grad_clip must be >= 0");
  if (checkpoint_every < 0) throw InvalidConfig("checkpoint_every must be >= 0");
}

NoiseDraw draw_noise(int sequences, const ModelConfig& config, const NoiseSchedule& schedule, std::mt19937_64& rng) {
  NoiseDraw draw;
  std::uniform_int_distribution<int> step(1, schedule.steps());
  draw.steps.resize(sequences);
  for (auto& t : draw.steps) t = step(rng);
  const Eigen::Index rows = static_cast<Eigen::Index>(sequences) * config.seq_len;
  draw.noise = standard_normal(rows, config.d_embed, rng);
  return draw;
}

LossBreakdown evaluate_loss(const DenoiserModel& model, std::span<const std::uint8_t> tokens, const NoiseDraw& draw,
                            const NoiseSchedule& schedule, double rounding_weight, DenoiserParameters* grads,
                            std::mt19937_64* dropout_rng) {
  const auto& cfg = model.config();
  const int s = cfg.seq_len;
  const int batch = static_cast<int>(draw.steps.size());
  if (batch == 0 || tokens.size() != static_cast<std::size_t>(batch) * s) {
    throw ShapeMismatch("token count does not match the noise draw");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(batch) * s;
  const Matrix x0 = embed_tokens(model, tokens);

  Matrix inputs(rows, cfg.d_embed);
  std::vector<double> root_ab(batch), root_one_minus_ab(batch);
  for (int b = 0; b < batch; ++b) {
    const int t = draw.steps[b];
    schedule.beta(t);  // range check
    const double ab = schedule.alpha_bar(t);
    root_ab[b] = std::sqrt(ab);
    root_one_minus_ab[b] = std::sqrt(1.0 - ab);
    inputs.middleRows(b * s, s) = root_ab[b] * x0.middleRows(b * s, s) + root_one_minus_ab[b] * draw.noise.middleRows(b * s, s);
  }

  ForwardTape tape;
  ForwardOptions options;
  options.dropout_rng = dropout_rng;
  const Matrix predicted = forward_with_tape(model, inputs, draw.steps, tape, options);

  const double count = static_cast<double>(rows) * cfg.d_embed;
  const Matrix noise_error = predicted - draw.noise;
  Matrix rounding_error(rows, cfg.d_embed);
  for (int b = 0; b < batch; ++b) {
    rounding_error.middleRows(b * s, s) =
        (inputs.middleRows(b * s, s) - root_one_minus_ab[b] * predicted.middleRows(b * s, s)) / root_ab[b] -
        x0.middleRows(b * s, s);
  }

  LossBreakdown loss;
  loss.noise_mse = noise_error.squaredNorm() / count;
  loss.rounding_loss = rounding_error.squaredNorm() / count;
  loss.total = loss.noise_mse + rounding_weight * loss.rounding_loss;

  if (grads) {
    const Matrix d_x0_hat = (2.0 * rounding_weight / count) * rounding_error;
    Matrix d_predicted = (2.0 / count) * noise_error;
    for (int b = 0; b < batch; ++b) {
      d_predicted.middleRows(b * s, s) -= (root_one_minus_ab[b] / root_ab[b]) * d_x0_hat.middleRows(b * s, s);
    }
    Matrix d_inputs = backward(model, tape, d_predicted, *grads);
    Matrix d_x0 = -d_x0_hat;
    for (int b = 0; b < batch; ++b) {
      d_inputs.middleRows(b * s, s) += d_x0_hat.middleRows(b * s, s) / root_ab[b];
      d_x0.middleRows(b * s, s) += root_ab[b] * d_inputs.middleRows(b * s, s);
    }
    for (Eigen::Index r = 0; r < rows; ++r) grads->token_embedding.row(tokens[static_cast<std::size_t>(r)]) += d_x0.row(r);
  }
  return loss;
}

AdamOptimizer::AdamOptimizer(const DenoiserParameters& like, double learning_rate, double beta1, double beta2,
                             double epsilon)
    : first_moment_(like), second_moment_(like), learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon) {
  zero(first_moment_);
  zero(second_moment_);
}

void AdamOptimizer::step(DenoiserParameters& params, const DenoiserParameters& grads) {
  ++iterations_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(iterations_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(iterations_));
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = first_moment_.tensors();
  auto v = second_moment_.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& mi = *m[i].value;
    auto& vi = *v[i].value;
    const auto& gi = *g[i].value;
    mi = beta1_ * mi + (1.0 - beta1_) * gi;
    vi = beta2_ * vi + (1.0 - beta2_) * gi.cwiseProduct(gi);
    p[i].value->array() -=
        learning_rate_ * (mi.array() / c1) / ((vi.array() / c2).sqrt() + epsilon_);
  }
}

double gradient_norm(const DenoiserParameters& grads) {
  double sum = 0.0;
  for (const auto& t : grads.tensors()) sum += t.value->squaredNorm();
  return std::sqrt(sum);
}

Trainer::Trainer(DenoiserModel& model, NoiseSchedule schedule, TrainConfig config)
    : model_(model),
      schedule_(std::move(schedule)),
      config_(config),
      optimizer_(model.params(), config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon),
      grads_(DenoiserParameters::zeros(model.config())),
      noise_rng_(config.rng_seed ^ 0x6E6F697365ULL),
      dropout_rng_(config.rng_seed ^ 0x64726F70ULL) {
  config_.validate();
}

LossBreakdown Trainer::training_step(std::span<const std::uint8_t> tokens) {
  const int s = model_.config().seq_len;
  if (tokens.empty() || tokens.size() % static_cast<std::size_t>(s) != 0) {
    throw ShapeMismatch("batch must hold a positive whole number of sequences");
  }
  const int sequences = static_cast<int>(tokens.size() / s);
  const NoiseDraw draw = draw_noise(sequences, model_.config(), schedule_, noise_rng_);
  zero(grads_);
  const LossBreakdown loss =
      evaluate_loss(model_, tokens, draw, schedule_, config_.rounding_weight, &grads_, &dropout_rng_);
  if (!std::isfinite(loss.total) || !std::isfinite(loss.noise_mse) || !std::isfinite(loss.rounding_loss)) {
    std::ostringstream msg;
    msg << "step " << optimizer_.iterations() + 1 << ": noise_mse=" << loss.noise_mse
        << " rounding=" << loss.rounding_loss << " grad_norm=" << gradient_norm(grads_);
    throw NonFiniteLoss(msg.str());
  }
  if (config_.freeze_embeddings) grads_.token_embedding.setZero();
  if (config_.grad_clip > 0.0) {
    const double norm = gradient_norm(grads_);
    if (norm > config_.grad_clip) {
      for (auto& t : grads_.tensors()) *t.value *= config_.grad_clip / norm;
    }
  }
  optimizer_.step(model_.params(), grads_);
  return loss;
}

std::vector<std::uint8_t> tokenize(std::span<const Ipv6Address> addresses) {
  std::vector<std::uint8_t> tokens;
  tokens.reserve(addresses.size() * kNybbleCount);
  for (const auto& a : addresses) {
    const auto n = to_nybbles(a);
    tokens.insert(tokens.end(), n.values().begin(), n.values().end());
  }
  return tokens;
}

std::vector<LossBreakdown> train(DenoiserModel& model, const NoiseSchedule& schedule, const TrainConfig& config,
                                 const SeedSet& corpus, const TrainHooks& hooks) {
  config.validate();
  if (corpus.empty()) throw EmptyCorpus("training corpus is empty");
  if (model.config().seq_len != kNybbleCount) {
    throw InvalidConfig("address training requires seq_len = 32");
  }
  Trainer trainer(model, schedule, config);
  const std::vector<std::uint8_t> all_tokens = tokenize(corpus.addresses());

  std::mt19937_64 order_rng(config.rng_seed ^ 0x6F72646572ULL);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), order_rng);
  std::size_t cursor = 0;

  std::vector<LossBreakdown> history;
  history.reserve(config.steps);
  std::vector<std::uint8_t> batch(static_cast<std::size_t>(config.batch_size) * kNybbleCount);
  for (int step = 1; step <= config.steps; ++step) {
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      std::copy_n(all_tokens.begin() + static_cast<std::ptrdiff_t>(idx * kNybbleCount), kNybbleCount,
                  batch.begin() + static_cast<std::ptrdiff_t>(b) * kNybbleCount);
    }
    history.push_back(trainer.training_step(batch));
    if (hooks.on_step) hooks.on_step(step, history.back());
    const bool cadence = config.checkpoint_every > 0 && step % config.checkpoint_every == 0;
    if (hooks.on_checkpoint && (cadence || step == config.steps)) hooks.on_checkpoint(step, model);
  }
  return history;
}

}  // namespace sixdiff

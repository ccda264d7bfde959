#include "riskloss/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "riskloss/format.hpp"

namespace riskloss {
namespace {

constexpr std::size_t kEvalChunk = 256;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

void add_warning(TrainLog& log, const std::string& warning) {
  if (std::find(log.warnings.begin(), log.warnings.end(), warning) == log.warnings.end()) {
    log.warnings.push_back(warning);
  }
}

std::vector<std::size_t> chunk(std::span<const std::size_t> all, std::size_t begin,
                               std::size_t size) {
  const std::size_t end = std::min(all.size(), begin + size);
  return {all.begin() + static_cast<std::ptrdiff_t>(begin),
          all.begin() + static_cast<std::ptrdiff_t>(end)};
}

// Mean of per-chunk losses over the split, in chronological chunks.
double split_loss(const ModelParams& params, const WindowedDataset& dataset,
                  std::span<const std::size_t> indices, const LossFunction& loss,
                  std::size_t batch_size) {
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t b = 0; b < indices.size(); b += batch_size) {
    total += batch_loss(params, dataset, chunk(indices, b, batch_size), loss);
    ++batches;
  }
  return total / static_cast<double>(batches);
}

}  // namespace

std::vector<std::string> TrainConfig::validate() const {
  loss.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("learning rate must be finite and > 0");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("batch size must be >= 1");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.epsilon > 0.0)) {
    throw std::invalid_argument("invalid Adam constants");
  }
  std::vector<std::string> warnings;
  if (loss.kind != LossKind::Mse &&
      static_cast<double>(batch_size) * (1.0 - loss.alpha) < 1.0) {
    warnings.emplace_back(kTailWarning);
  }
  return warnings;
}

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_mse,seconds\n";
  for (const auto& r : log.epochs) {
    out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.val_loss) << ','
        << format_real(r.val_mse) << ',' << format_real(r.seconds) << '\n';
  }
  return out.str();
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << train_log_csv(log);
}

Adam::Adam(const ModelParams& params, double lr, AdamConfig config) : lr_(lr), config_(config) {
  for (const auto& [name, t] : params.named()) {
    m_.emplace_back(t->shape());
    v_.emplace_back(t->shape());
  }
}

void Adam::step(ModelParams& params, std::span<const ad::Tensor> grads) {
  auto named = params.named();
  if (grads.size() != named.size()) {
    throw std::invalid_argument("Adam::step: gradient count does not match parameters");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t p = 0; p < named.size(); ++p) {
    ad::Tensor& w = *named[p].second;
    const ad::Tensor& g = grads[p];
    if (g.shape() != w.shape()) {
      throw std::invalid_argument("Adam::step: gradient shape mismatch for " + named[p].first);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[p][i] = config_.beta1 * m_[p][i] + (1.0 - config_.beta1) * g[i];
      v_[p][i] = config_.beta2 * v_[p][i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m_[p][i] / bias1;
      const double v_hat = v_[p][i] / bias2;
      w[i] -= lr_ * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

BatchGradient batch_gradient(const ModelParams& params, const WindowedDataset& dataset,
                             std::span<const std::size_t> window_indices,
                             const LossFunction& loss, SplitMix64* dropout_rng) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  ForwardOptions options;
  options.training = dropout_rng != nullptr;
  options.rng = dropout_rng;
  const ad::Var pred =
      forward(tape, params, dataset.inputs(window_indices), options, &leaves);
  const auto truth = dataset.targets(window_indices);

  BatchGradient out;
  out.loss = loss(pred.value().data(), truth);
  if (!std::isfinite(out.loss.value)) {
    throw std::runtime_error("non-finite loss");
  }
  const ad::Var objective = ad::scalar_objective(pred, out.loss.value, out.loss.gradient);
  tape.backward(objective);
  out.grads.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    out.grads.push_back(tape.grad(leaf));
  }
  return out;
}

double batch_loss(const ModelParams& params, const WindowedDataset& dataset,
                  std::span<const std::size_t> window_indices, const LossFunction& loss) {
  const auto pred = predict(params, dataset.inputs(window_indices));
  return loss(pred, dataset.targets(window_indices)).value;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(derive_seed(derive_seed(seed, kShuffleStream), epoch));
  // Fisher-Yates, explicit so the permutation does not depend on the standard library.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

TrainResult train(const ModelConfig& model_config, const WindowedDataset& dataset,
                  const TrainConfig& config) {
  return train_from(init_params(model_config), dataset, config);
}

TrainResult train_from(ModelParams initial, const WindowedDataset& dataset,
                       const TrainConfig& config) {
  TrainResult result{std::move(initial), {}};
  for (const auto& w : config.validate()) {
    add_warning(result.log, w);
  }
  const ModelConfig& mc = result.params.config;
  if (mc.window != dataset.window() || mc.features != dataset.features()) {
    throw std::invalid_argument("model window/features do not match the dataset");
  }
  if (config.epochs == 0) {
    return result;
  }
  const auto train_idx = dataset.indices(Split::Train);
  if (train_idx.empty()) {
    throw std::invalid_argument("train split has no windows");
  }
  const auto val_idx = dataset.indices(Split::Val);
  if (config.patience && val_idx.empty()) {
    throw std::invalid_argument("early stopping requires a nonempty validation split");
  }

  const LossFunction loss = make_loss(config.loss);
  Adam adam(result.params, config.lr, config.adam);
  SplitMix64 dropout_rng(derive_seed(config.seed, kDropoutStream));
  SplitMix64* dropout = mc.dropout > 0.0 ? &dropout_rng : nullptr;

  ModelParams best = result.params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto order = epoch_order(config.seed, epoch, train_idx.size());
    std::vector<std::size_t> shuffled(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      shuffled[i] = train_idx[order[i]];
    }

    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < shuffled.size(); b += config.batch_size) {
      const auto idx = chunk(shuffled, b, config.batch_size);
      BatchGradient step;
      try {
        step = batch_gradient(result.params, dataset, idx, loss, dropout);
      } catch (const std::exception& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batches) + ": " + e.what());
      }
      if (step.loss.warning) {
        add_warning(result.log, *step.loss.warning);
      }
      loss_total += step.loss.value;
      ++batches;
      adam.step(result.params, step.grads);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_total / static_cast<double>(batches);
    record.val_loss = std::numeric_limits<double>::quiet_NaN();
    record.val_mse = std::numeric_limits<double>::quiet_NaN();
    if (!val_idx.empty()) {
      record.val_loss = split_loss(result.params, dataset, val_idx, loss, config.batch_size);
      record.val_mse = evaluate(result.params, dataset, Split::Val).report.overall.mse;
    }
    if (config.record_wall_time) {
      record.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.log.epochs.push_back(record);

    if (config.patience) {
      if (record.val_loss < best_val) {
        best_val = record.val_loss;
        best = result.params;
        result.log.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= *config.patience) {
        break;
      }
    }
  }
  if (config.patience) {
    result.params = std::move(best);
  } else {
    result.log.best_epoch = result.log.epochs.back().epoch;
  }
  return result;
}

std::vector<double> predict_split(const ModelParams& params, const WindowedDataset& dataset,
                                  Split split) {
  const auto idx = dataset.indices(split);
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t b = 0; b < idx.size(); b += kEvalChunk) {
    const auto part = predict(params, dataset.inputs(chunk(idx, b, kEvalChunk)));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

Evaluation evaluate(const ModelParams& params, const WindowedDataset& dataset, Split split,
                    double tail_fraction) {
  const auto idx = dataset.indices(split);
  if (idx.empty()) {
    throw std::invalid_argument("split '" + std::string(to_string(split)) + "' has no windows");
  }
  Evaluation ev;
  ev.pred = dataset.denormalize(predict_split(params, dataset, split));
  for (const auto i : idx) {
    ev.dates.push_back(dataset.target_date(i));
    ev.truth.push_back(dataset.target_close(i));
  }
  ev.report = compute_metrics(ev.pred, ev.truth, tail_fraction);
  return ev;
}

}  // namespace riskloss

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskloss/data.hpp"
#include "riskloss/loss.hpp"
#include "riskloss/metrics.hpp"
#include "riskloss/model.hpp"

namespace riskloss {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  LossConfig loss;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  AdamConfig adam;
  std::optional<std::size_t> patience;
  // Wall-clock seconds per epoch are logged only when set; otherwise the
  // column is 0 so logs stay byte-reproducible.
  bool record_wall_time = false;

  // Throws on invalid values; returns non-fatal warnings.
  std::vector<std::string> validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when the validation split is empty
  double val_mse = 0.0;   // price units; NaN when the validation split is empty
  double seconds = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  // Epoch whose parameters were returned (0 = initial parameters).
  std::size_t best_epoch = 0;
};

// epoch,train_loss,val_loss,val_mse,seconds
void write_train_log(const std::filesystem::path& path, const TrainLog& log);
std::string train_log_csv(const TrainLog& log);

// Adam over every tensor of a ModelParams, in named() order.
class Adam {
 public:
  Adam(const ModelParams& params, double lr, AdamConfig config);

  void step(ModelParams& params, std::span<const ad::Tensor> grads);
  std::size_t steps() const { return steps_; }

 private:
  double lr_;
  AdamConfig config_;
  std::size_t steps_ = 0;
  std::vector<ad::Tensor> m_;
  std::vector<ad::Tensor> v_;
};

struct BatchGradient {
  LossResult loss;
  std::vector<ad::Tensor> grads;  // named() order
};

// Forward + loss + backward over the given windows.
BatchGradient batch_gradient(const ModelParams& params, const WindowedDataset& dataset,
                             std::span<const std::size_t> window_indices,
                             const LossFunction& loss, SplitMix64* dropout_rng = nullptr);

// Loss value only, no dropout, no tape gradients.
double batch_loss(const ModelParams& params, const WindowedDataset& dataset,
                  std::span<const std::size_t> window_indices, const LossFunction& loss);

// Permutation of [0, n) used for the given (1-based) epoch.
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

TrainResult train(const ModelConfig& model_config, const WindowedDataset& dataset,
                  const TrainConfig& config);

// Same loop starting from existing parameters (fine-tuning from a checkpoint).
TrainResult train_from(ModelParams initial, const WindowedDataset& dataset,
                       const TrainConfig& config);

struct Evaluation {
  MetricsReport report;
  std::vector<std::string> dates;
  std::vector<double> truth;  // price units
  std::vector<double> pred;   // price units
};

// Normalized-unit predictions for the split, chronological.
std::vector<double> predict_split(const ModelParams& params, const WindowedDataset& dataset,
                                  Split split);

Evaluation evaluate(const ModelParams& params, const WindowedDataset& dataset, Split split,
                    double tail_fraction = 0.05);

}  // namespace riskloss

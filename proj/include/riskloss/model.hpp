#pragma once

// Post-norm transformer encoder for next-step regression:
//
//   x[B,W,F] -> linear(F -> d_model) + sinusoidal positions
//            -> N x { LN(x + MHA(x)); LN(x + FFN(x)) }
//            -> last timestep -> linear(d_model -> 1) -> y[B]

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "riskloss/ops.hpp"
#include "riskloss/random.hpp"
#include "riskloss/tensor.hpp"

namespace riskloss {

struct ModelConfig {
  std::size_t window = 32;
  std::size_t features = 1;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t d_ff = 128;
  std::uint64_t seed = 0;
  // Applied to each sublayer output before the residual, training only.
  double dropout = 0.0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EncoderLayerParams {
  ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  ad::Tensor ln1_gain, ln1_bias;
  ad::Tensor w1, b1, w2, b2;
  ad::Tensor ln2_gain, ln2_bias;

  friend bool operator==(const EncoderLayerParams&, const EncoderLayerParams&) = default;
};

struct ModelParams {
  ModelConfig config;
  ad::Tensor in_w, in_b;
  std::vector<EncoderLayerParams> layers;
  ad::Tensor head_w, head_b;

  // Every parameter tensor in a fixed canonical order.
  std::vector<std::pair<std::string, ad::Tensor*>> named();
  std::vector<std::pair<std::string, const ad::Tensor*>> named() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Glorot-uniform weights from the config seed; zero biases; unit LN gains.
ModelParams init_params(const ModelConfig& config);

struct ForwardOptions {
  bool training = false;
  // Dropout mask source; required when training with dropout > 0.
  SplitMix64* rng = nullptr;
  // When set, receives every post-softmax attention tensor [B,W,W].
  std::vector<ad::Tensor>* attention = nullptr;
};

// Records the forward pass on `tape`. When `leaves` is non-null the
// parameters become gradient leaves (returned in named() order); otherwise
// they are bound as constants.
ad::Var forward(ad::Tape& tape, const ModelParams& params, const ad::Tensor& batch,
                const ForwardOptions& options = {}, std::vector<ad::Var>* leaves = nullptr);

// Gradient-free convenience: predictions for a [B,W,F] batch.
std::vector<double> predict(const ModelParams& params, const ad::Tensor& batch);

// Sinusoidal encoding [W, d]: sin/cos(pos * 10000^(-2i/d)) on even/odd columns.
ad::Tensor positional_encoding(std::size_t window, std::size_t d_model);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace riskloss

#include "riskloss/model.hpp"

#include <cmath>
#include <stdexcept>

namespace riskloss {
namespace {

ad::Tensor glorot(SplitMix64& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  ad::Tensor t({fan_in, fan_out});
  for (double& v : t.data()) {
    v = rng.uniform(-limit, limit);
  }
  return t;
}

ad::Var linear(ad::Var x, ad::Var w, ad::Var b) { return ad::add(ad::matmul(x, w), b); }

ad::Var dropout(ad::Var x, double rate, const ForwardOptions& options) {
  if (!options.training || rate <= 0.0) {
    return x;
  }
  if (options.rng == nullptr) {
    throw std::invalid_argument("dropout during training requires an rng");
  }
  ad::Tensor mask(x.value().shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) {
    m = options.rng->uniform() < rate ? 0.0 : keep_scale;
  }
  return ad::mul(x, x.tape()->constant(std::move(mask)));
}

}  // namespace

void ModelConfig::validate() const {
  if (window == 0 || features == 0 || d_model == 0 || heads == 0 || layers == 0 || d_ff == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (d_model % heads != 0) {
    throw std::invalid_argument("d_model (" + std::to_string(d_model) +
                                ") must be divisible by heads (" + std::to_string(heads) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
}

std::vector<std::pair<std::string, ad::Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  out.emplace_back("in_w", &in_w);
  out.emplace_back("in_b", &in_b);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& p = layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    out.emplace_back(pre + "wq", &p.wq);
    out.emplace_back(pre + "bq", &p.bq);
    out.emplace_back(pre + "wk", &p.wk);
    out.emplace_back(pre + "bk", &p.bk);
    out.emplace_back(pre + "wv", &p.wv);
    out.emplace_back(pre + "bv", &p.bv);
    out.emplace_back(pre + "wo", &p.wo);
    out.emplace_back(pre + "bo", &p.bo);
    out.emplace_back(pre + "ln1_gain", &p.ln1_gain);
    out.emplace_back(pre + "ln1_bias", &p.ln1_bias);
    out.emplace_back(pre + "w1", &p.w1);
    out.emplace_back(pre + "b1", &p.b1);
    out.emplace_back(pre + "w2", &p.w2);
    out.emplace_back(pre + "b2", &p.b2);
    out.emplace_back(pre + "ln2_gain", &p.ln2_gain);
    out.emplace_back(pre + "ln2_bias", &p.ln2_bias);
  }
  out.emplace_back("head_w", &head_w);
  out.emplace_back("head_b", &head_b);
  return out;
}

std::vector<std::pair<std::string, const ad::Tensor*>> ModelParams::named() const {
  auto mutable_view = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const ad::Tensor*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, t] : mutable_view) {
    out.emplace_back(std::move(name), t);
  }
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) {
    n += t->size();
  }
  return n;
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  SplitMix64 rng(config.seed);
  const std::size_t d = config.d_model;
  ModelParams p;
  p.config = config;
  p.in_w = glorot(rng, config.features, d);
  p.in_b = ad::Tensor({d});
  for (std::size_t l = 0; l < config.layers; ++l) {
    EncoderLayerParams layer;
    layer.wq = glorot(rng, d, d);
    layer.bq = ad::Tensor({d});
    layer.wk = glorot(rng, d, d);
    layer.bk = ad::Tensor({d});
    layer.wv = glorot(rng, d, d);
    layer.bv = ad::Tensor({d});
    layer.wo = glorot(rng, d, d);
    layer.bo = ad::Tensor({d});
    layer.ln1_gain = ad::Tensor::filled({d}, 1.0);
    layer.ln1_bias = ad::Tensor({d});
    layer.w1 = glorot(rng, d, config.d_ff);
    layer.b1 = ad::Tensor({config.d_ff});
    layer.w2 = glorot(rng, config.d_ff, d);
    layer.b2 = ad::Tensor({d});
    layer.ln2_gain = ad::Tensor::filled({d}, 1.0);
    layer.ln2_bias = ad::Tensor({d});
    p.layers.push_back(std::move(layer));
  }
  p.head_w = glorot(rng, d, 1);
  p.head_b = ad::Tensor({1});
  return p;
}

ad::Tensor positional_encoding(std::size_t window, std::size_t d_model) {
  ad::Tensor pe({window, d_model});
  for (std::size_t pos = 0; pos < window; ++pos) {
    for (std::size_t j = 0; j < d_model; ++j) {
      const double pair = static_cast<double>(j - j % 2);
      const double freq = std::pow(10000.0, -pair / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * freq;
      pe[pos * d_model + j] = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

ad::Var forward(ad::Tape& tape, const ModelParams& params, const ad::Tensor& batch,
                const ForwardOptions& options, std::vector<ad::Var>* leaves) {
  const ModelConfig& cfg = params.config;
  if (batch.rank() != 3 || batch.dim(1) != cfg.window || batch.dim(2) != cfg.features) {
    throw std::invalid_argument("forward: expected batch shape [B," + std::to_string(cfg.window) +
                                "," + std::to_string(cfg.features) + "], got " +
                                ad::shape_string(batch.shape()));
  }
  std::vector<ad::Var> bound;
  for (const auto& [name, t] : params.named()) {
    bound.push_back(leaves != nullptr ? tape.leaf(*t) : tape.constant(*t));
  }
  if (leaves != nullptr) {
    *leaves = bound;
  }
  std::size_t next = 0;
  auto take = [&]() { return bound.at(next++); };

  const std::size_t batch_size = batch.dim(0);
  const std::size_t d = cfg.d_model;
  const std::size_t dk = d / cfg.heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const ad::Var in_w = take();
  const ad::Var in_b = take();
  ad::Var x = linear(tape.constant(batch), in_w, in_b);
  x = ad::add(x, tape.constant(positional_encoding(cfg.window, d)));

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const ad::Var wq = take(), bq = take(), wk = take(), bk = take();
    const ad::Var wv = take(), bv = take(), wo = take(), bo = take();
    const ad::Var ln1_gain = take(), ln1_bias = take();
    const ad::Var w1 = take(), b1 = take(), w2 = take(), b2 = take();
    const ad::Var ln2_gain = take(), ln2_bias = take();

    const ad::Var q = linear(x, wq, bq);
    const ad::Var k = linear(x, wk, bk);
    const ad::Var v = linear(x, wv, bv);
    std::vector<ad::Var> heads;
    heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const ad::Var qh = ad::slice(q, 2, h * dk, dk);
      const ad::Var kh = ad::slice(k, 2, h * dk, dk);
      const ad::Var vh = ad::slice(v, 2, h * dk, dk);
      const ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), attn_scale);
      const ad::Var weights = ad::softmax(scores);
      if (options.attention != nullptr) {
        options.attention->push_back(weights.value());
      }
      heads.push_back(ad::matmul(weights, vh));
    }
    ad::Var attn = linear(ad::concat(heads, 2), wo, bo);
    attn = dropout(attn, cfg.dropout, options);
    x = ad::layer_norm(ad::add(x, attn), ln1_gain, ln1_bias);

    ad::Var ff = linear(ad::relu(linear(x, w1, b1)), w2, b2);
    ff = dropout(ff, cfg.dropout, options);
    x = ad::layer_norm(ad::add(x, ff), ln2_gain, ln2_bias);
  }

  const ad::Var last = ad::reshape(ad::slice(x, 1, cfg.window - 1, 1), {batch_size, d});
  const ad::Var head_w = take();
  const ad::Var head_b = take();
  return ad::reshape(linear(last, head_w, head_b), {batch_size});
}

std::vector<double> predict(const ModelParams& params, const ad::Tensor& batch) {
  ad::Tape tape;
  const ad::Var out = forward(tape, params, batch);
  return {out.value().data().begin(), out.value().data().end()};
}

}  // namespace riskloss

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "riskloss/format.hpp"
#include "riskloss/model.hpp"

// Text checkpoint, version 1:
//
//   riskloss-checkpoint 1
//   config <window> <features> <d_model> <heads> <layers> <d_ff> <seed> <dropout>
//   tensor <name> <rank> <dim>...
//   <values, row-major, 17 significant digits>
//   ...
//   end

namespace riskloss {
namespace {

constexpr const char* kMagic = "riskloss-checkpoint";
constexpr int kVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("checkpoint " + path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    fail(path, "cannot open for writing");
  }
  const ModelConfig& c = params.config;
  out << kMagic << ' ' << kVersion << '\n';
  out << "config " << c.window << ' ' << c.features << ' ' << c.d_model << ' ' << c.heads << ' '
      << c.layers << ' ' << c.d_ff << ' ' << c.seed << ' ' << format_real(c.dropout) << '\n';
  for (const auto& [name, t] : params.named()) {
    out << "tensor " << name << ' ' << t->rank();
    for (const auto d : t->shape()) {
      out << ' ' << d;
    }
    out << '\n';
    for (std::size_t i = 0; i < t->size(); ++i) {
      out << (i == 0 ? "" : " ") << format_real((*t)[i]);
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) {
    fail(path, "write failed");
  }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(path, "cannot open");
  }
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) {
    fail(path, "not a checkpoint file");
  }
  if (version != kVersion) {
    fail(path, "unsupported version " + std::to_string(version));
  }
  std::string keyword;
  ModelConfig config;
  std::string dropout_text;
  in >> keyword >> config.window >> config.features >> config.d_model >> config.heads >>
      config.layers >> config.d_ff >> config.seed >> dropout_text;
  if (!in || keyword != "config") {
    fail(path, "malformed config line");
  }
  const auto dropout = parse_real(dropout_text);
  if (!dropout) {
    fail(path, "malformed dropout value");
  }
  config.dropout = *dropout;

  // The layout (names and shapes) is a pure function of the config.
  ModelParams params = init_params(config);
  for (auto& [name, tensor] : params.named()) {
    std::string stored_name;
    std::size_t rank = 0;
    in >> keyword >> stored_name >> rank;
    if (!in || keyword != "tensor" || stored_name != name) {
      fail(path, "expected tensor " + name);
    }
    ad::Shape shape(rank);
    for (auto& d : shape) {
      in >> d;
    }
    if (!in || shape != tensor->shape()) {
      fail(path, "tensor " + name + " has shape " + ad::shape_string(shape) + ", expected " +
                     ad::shape_string(tensor->shape()));
    }
    for (double& v : tensor->data()) {
      std::string token;
      in >> token;
      const auto parsed = parse_real(token);
      if (!in || !parsed) {
        fail(path, "bad value in tensor " + name);
      }
      v = *parsed;
    }
  }
  in >> keyword;
  if (keyword != "end") {
    fail(path, "missing end marker");
  }
  return params;
}

}  // namespace riskloss

#include "riskloss/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "riskloss/cli/grid.hpp"
#include "riskloss/cli/manifest.hpp"
#include "riskloss/cli/report.hpp"
#include "riskloss/data.hpp"
#include "riskloss/format.hpp"
#include "riskloss/train.hpp"

namespace riskloss::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr std::string_view kCheckpointFile = "model.ckpt";
constexpr std::string_view kTrainLogFile = "train_log.csv";
constexpr std::string_view kGridFile = "grid.csv";
constexpr std::string_view kMaeVsAlphaFile = "mae_vs_alpha.csv";

// Invalid flags or configuration, detected before any work starts.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename F>
auto validated(F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& field : split_csv_line(text)) {
    out.emplace_back(trim(field));
  }
  return out;
}

SplitFractions parse_splits(const std::string& text) {
  const auto fields = split_list(text);
  if (fields.size() != 3) {
    throw UsageError("--splits expects three comma-separated fractions");
  }
  double v[3];
  for (std::size_t i = 0; i < 3; ++i) {
    const auto x = parse_real(fields[i]);
    if (!x) {
      throw UsageError("--splits: bad number '" + fields[i] + "'");
    }
    v[i] = *x;
  }
  return {v[0], v[1], v[2]};
}

// ---- configuration <-> JSON -------------------------------------------------

ordered_json to_json(const WindowOptions& o) {
  return {{"window", o.window},
          {"horizon", o.horizon},
          {"splits", {o.splits.train, o.splits.val, o.splits.test}},
          {"features", o.features}};
}

WindowOptions window_options_from_json(const ordered_json& j) {
  WindowOptions o;
  o.window = j.at("window").get<std::size_t>();
  o.horizon = j.at("horizon").get<std::size_t>();
  const auto& s = j.at("splits");
  o.splits = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
  o.features = j.at("features").get<std::vector<std::string>>();
  return o;
}

ordered_json to_json(const ModelConfig& c) {
  return {{"window", c.window}, {"features", c.features}, {"d_model", c.d_model},
          {"heads", c.heads},   {"layers", c.layers},     {"d_ff", c.d_ff},
          {"seed", c.seed},     {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const ordered_json& j) {
  ModelConfig c;
  c.window = j.at("window").get<std::size_t>();
  c.features = j.at("features").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["loss"] = to_string(c.loss.kind);
  j["alpha"] = c.loss.alpha;
  j["lambda"] = c.loss.lambda;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}};
  j["patience"] = c.patience ? ordered_json(*c.patience) : ordered_json(nullptr);
  j["record_time"] = c.record_wall_time;
  return j;
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig c;
  c.loss.kind = parse_loss_kind(j.at("loss").get<std::string>());
  c.loss.alpha = j.at("alpha").get<double>();
  c.loss.lambda = j.at("lambda").get<double>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& a = j.at("adam");
  c.adam = {a.at("beta1").get<double>(), a.at("beta2").get<double>(),
            a.at("epsilon").get<double>()};
  if (!j.at("patience").is_null()) {
    c.patience = j.at("patience").get<std::size_t>();
  }
  c.record_wall_time = j.at("record_time").get<bool>();
  return c;
}

ordered_json to_json(const JumpDiffusionParams& p) {
  return {{"mu", p.mu},           {"sigma", p.sigma},       {"jump_prob", p.jump_prob},
          {"jump_mean", p.jump_mean}, {"jump_std", p.jump_std}, {"s0", p.s0}};
}

JumpDiffusionParams jump_params_from_json(const ordered_json& j) {
  JumpDiffusionParams p;
  p.mu = j.at("mu").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.jump_prob = j.at("jump_prob").get<double>();
  p.jump_mean = j.at("jump_mean").get<double>();
  p.jump_std = j.at("jump_std").get<double>();
  p.s0 = j.at("s0").get<double>();
  return p;
}

// The data file must still hash to what the manifest recorded.
fs::path verified_input(const ordered_json& entry) {
  const fs::path path = entry.at("path").get<std::string>();
  const auto digest = sha256_file(path);
  if (digest != entry.at("sha256").get<std::string>()) {
    throw std::runtime_error(path.string() + " no longer matches the recorded sha256");
  }
  return path;
}

// ---- jobs -------------------------------------------------------------------

struct GenJob {
  std::uint64_t seed = 0;
  std::size_t days = 0;
  JumpDiffusionParams params;
};

struct TrainJob {
  fs::path data;
  WindowOptions window;
  ModelConfig model;
  TrainConfig train;
  std::optional<fs::path> init;
};

struct AblateJob {
  fs::path data;
  WindowOptions window;
  ModelConfig model;
  TrainConfig train;  // loss.alpha / loss.lambda / seed are set per grid point
  std::vector<double> alphas;
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  Split split = Split::Test;
  double tail = 0.05;
};

ordered_json run_gen(const GenJob& job, const fs::path& out) {
  const auto series = gen_synthetic(job.seed, job.days, job.params);
  if (out.has_parent_path()) {
    fs::create_directories(out.parent_path());
  }
  write_csv(out, series);
  auto manifest = manifest_header("gen-data");
  manifest["seed"] = job.seed;
  manifest["days"] = job.days;
  manifest["params"] = to_json(job.params);
  manifest["artifacts"] = {{out.filename().string(), sha256_file(out)}};
  return manifest;
}

fs::path gen_manifest_path(const fs::path& out) {
  return fs::path(out.string() + ".manifest.json");
}

void validate_train_job(TrainJob& job) {
  validated([&] {
    job.train.loss.validate();
    job.model.window = job.window.window;
    job.model.features = job.window.features.size();
    job.model.validate();
    return 0;
  });
}

ordered_json run_train(const TrainJob& job, const fs::path& out) {
  const auto series = load_csv(job.data);
  const WindowedDataset ds(series, job.window);
  ModelParams initial = job.init ? load_checkpoint(*job.init) : init_params(job.model);
  if (job.init && (initial.config.window != job.window.window ||
                   initial.config.features != job.window.features.size())) {
    throw std::runtime_error("checkpoint window/features do not match --window/--features");
  }
  const auto result = train_from(std::move(initial), ds, job.train);
  for (const auto& w : result.log.warnings) warn(w);
  for (const auto& r : result.log.epochs) {
    std::cout << "epoch " << r.epoch << " train_loss " << format_real(r.train_loss)
              << " val_loss " << format_real(r.val_loss) << '\n';
  }

  fs::create_directories(out);
  save_checkpoint(out / kCheckpointFile, result.params);
  write_train_log(out / kTrainLogFile, result.log);

  auto manifest = manifest_header("train");
  manifest["inputs"] = {{"data", file_entry(job.data)}};
  if (job.init) {
    manifest["inputs"]["init"] = file_entry(*job.init);
  }
  manifest["data"] = to_json(job.window);
  manifest["model"] = to_json(result.params.config);
  manifest["train"] = to_json(job.train);
  manifest["seed"] = job.train.seed;
  manifest["best_epoch"] = result.log.best_epoch;
  manifest["warnings"] = result.log.warnings;
  manifest["artifacts"] = {
      {std::string(kCheckpointFile), sha256_file(out / kCheckpointFile)},
      {std::string(kTrainLogFile), sha256_file(out / kTrainLogFile)}};
  return manifest;
}

TrainJob train_job_from_manifest(const ordered_json& m) {
  TrainJob job;
  job.data = verified_input(m.at("inputs").at("data"));
  if (m.at("inputs").contains("init")) {
    job.init = verified_input(m.at("inputs").at("init"));
  }
  job.window = window_options_from_json(m.at("data"));
  job.model = model_config_from_json(m.at("model"));
  job.train = train_config_from_json(m.at("train"));
  return job;
}

void validate_ablate_job(AblateJob& job) {
  validated([&] {
    if (job.train.loss.kind == LossKind::Mse) {
      throw std::invalid_argument("ablate needs --loss var-mse or cvar-mse");
    }
    if (job.seeds.empty()) {
      throw std::invalid_argument("--seeds must be >= 1");
    }
    for (const double a : job.alphas) {
      for (const double l : job.lambdas) {
        LossConfig c = job.train.loss;
        c.alpha = a;
        c.lambda = l;
        c.validate();
      }
    }
    job.model.window = job.window.window;
    job.model.features = job.window.features.size();
    job.model.validate();
    return 0;
  });
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RISKLOSS_THREADS"); env != nullptr && *env != '\0') {
    const auto v = parse_real(env);
    if (!v || *v < 1 || *v != std::floor(*v)) {
      throw UsageError("RISKLOSS_THREADS must be a positive integer");
    }
    threads = static_cast<std::size_t>(*v);
  }
  return std::min(threads, jobs);
}

struct GridPoint {
  double alpha;
  double lambda;
  std::uint64_t seed;
  MetricsReport report;
};

void append_stats(std::vector<std::string>& line, const ErrorStats& s) {
  line.push_back(format_real(s.mse));
  line.push_back(format_real(s.mae));
  line.push_back(s.r2 ? format_real(*s.r2) : "");
  line.push_back(format_real(s.max_ae));
  line.push_back(format_real(s.min_ae));
  line.push_back(std::to_string(s.n));
}

ordered_json run_ablate(const AblateJob& job, const fs::path& out) {
  const auto series = load_csv(job.data);
  const WindowedDataset ds(series, job.window);

  // Rows in (alpha, lambda, seed) order; each worker fills its own slots.
  std::vector<GridPoint> points;
  for (const double a : job.alphas) {
    for (const double l : job.lambdas) {
      for (const auto s : job.seeds) points.push_back({a, l, s, {}});
    }
  }
  std::vector<std::vector<std::string>> warnings(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        ModelConfig mc = job.model;
        mc.seed = points[i].seed;
        TrainConfig tc = job.train;
        tc.loss.alpha = points[i].alpha;
        tc.loss.lambda = points[i].lambda;
        tc.seed = points[i].seed;
        const auto result = train(mc, ds, tc);
        warnings[i] = result.log.warnings;
        points[i].report = evaluate(result.params, ds, job.split, job.tail).report;
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          std::ostringstream msg;
          msg << "alpha " << format_real(points[i].alpha) << ", lambda "
              << format_real(points[i].lambda) << ", seed " << points[i].seed << ": "
              << e.what();
          failure = std::make_exception_ptr(std::runtime_error(msg.str()));
        }
        next = points.size();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t threads = worker_count(points.size());
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) {
    std::rethrow_exception(failure);
  }
  std::vector<std::string> seen;
  for (const auto& list : warnings) {
    for (const auto& w : list) {
      if (std::find(seen.begin(), seen.end(), w) == seen.end()) {
        seen.push_back(w);
        warn(w);
      }
    }
  }

  std::ostringstream grid;
  grid << "alpha,lambda,seed,mse,mae,r2,max_ae,min_ae,n,extreme_mse,extreme_mae,extreme_r2,"
          "extreme_max_ae,extreme_min_ae,extreme_n\n";
  for (const auto& p : points) {
    std::vector<std::string> line{format_real(p.alpha), format_real(p.lambda),
                                  std::to_string(p.seed)};
    append_stats(line, p.report.overall);
    append_stats(line, *p.report.extreme);
    grid << join_csv(line) << '\n';
  }

  std::ostringstream curve;
  curve << "alpha,lambda,mae_mean,extreme_mae_mean,seeds\n";
  const std::size_t k = job.seeds.size();
  for (std::size_t i = 0; i < points.size(); i += k) {
    double mae = 0.0, extreme = 0.0;
    for (std::size_t s = i; s < i + k; ++s) {
      mae += points[s].report.overall.mae;
      extreme += points[s].report.extreme->mae;
    }
    curve << format_real(points[i].alpha) << ',' << format_real(points[i].lambda) << ','
          << format_real(mae / static_cast<double>(k)) << ','
          << format_real(extreme / static_cast<double>(k)) << ',' << k << '\n';
  }

  fs::create_directories(out);
  write_text(out / kGridFile, grid.str());
  write_text(out / kMaeVsAlphaFile, curve.str());

  auto manifest = manifest_header("ablate");
  manifest["inputs"] = {{"data", file_entry(job.data)}};
  manifest["data"] = to_json(job.window);
  manifest["model"] = to_json(job.model);
  manifest["train"] = to_json(job.train);
  manifest["grid"] = {{"alpha", job.alphas},
                      {"lambda", job.lambdas},
                      {"seeds", job.seeds},
                      {"split", to_string(job.split)},
                      {"tail", job.tail}};
  manifest["artifacts"] = {{std::string(kGridFile), sha256_file(out / kGridFile)},
                           {std::string(kMaeVsAlphaFile), sha256_file(out / kMaeVsAlphaFile)}};
  return manifest;
}

AblateJob ablate_job_from_manifest(const ordered_json& m) {
  AblateJob job;
  job.data = verified_input(m.at("inputs").at("data"));
  job.window = window_options_from_json(m.at("data"));
  job.model = model_config_from_json(m.at("model"));
  job.train = train_config_from_json(m.at("train"));
  const auto& g = m.at("grid");
  job.alphas = g.at("alpha").get<std::vector<double>>();
  job.lambdas = g.at("lambda").get<std::vector<double>>();
  job.seeds = g.at("seeds").get<std::vector<std::uint64_t>>();
  job.split = parse_split(g.at("split").get<std::string>());
  job.tail = g.at("tail").get<double>();
  return job;
}

// ---- evaluate / report ------------------------------------------------------

ordered_json read_run_manifest(const fs::path& run) {
  const auto manifest = read_json(run / kManifestFile);
  if (manifest.value("command", "") != "train") {
    throw std::runtime_error((run / kManifestFile).string() + " is not a train manifest");
  }
  return manifest;
}

void run_evaluate(const fs::path& run, Split split, double tail) {
  const auto manifest = read_run_manifest(run);
  const auto data = verified_input(manifest.at("inputs").at("data"));
  const WindowedDataset ds(load_csv(data), window_options_from_json(manifest.at("data")));
  const auto params = load_checkpoint(run / kCheckpointFile);
  const auto ev = evaluate(params, ds, split, tail);

  const std::string name(to_string(split));
  write_json(run / ("metrics_" + name + ".json"), to_json(ev.report));
  std::ostringstream csv;
  csv << "date,truth,pred\n";
  for (std::size_t i = 0; i < ev.pred.size(); ++i) {
    csv << ev.dates[i] << ',' << format_real(ev.truth[i]) << ',' << format_real(ev.pred[i])
        << '\n';
  }
  write_text(run / ("predictions_" + name + ".csv"), csv.str());

  const auto& o = ev.report.overall;
  std::cout << name << ": n " << o.n << " mse " << format_real(o.mse) << " mae "
            << format_real(o.mae) << " r2 " << (o.r2 ? format_real(*o.r2) : "missing")
            << " max_ae " << format_real(o.max_ae) << " min_ae " << format_real(o.min_ae)
            << '\n';
}

void run_report(const std::vector<std::string>& runs, Split split,
                const std::optional<fs::path>& out) {
  std::vector<ReportRow> rows;
  for (const auto& dir : runs) {
    const fs::path run(dir);
    const auto manifest = read_run_manifest(run);
    const auto metrics_path = run / ("metrics_" + std::string(to_string(split)) + ".json");
    if (!fs::exists(metrics_path)) {
      throw std::runtime_error(run.string() + " has no " + metrics_path.filename().string() +
                               "; run evaluate first");
    }
    ReportRow row;
    row.run = run.lexically_normal().filename().string();
    if (row.run.empty()) {
      row.run = run.lexically_normal().parent_path().filename().string();
    }
    const auto& t = manifest.at("train");
    row.loss = t.at("loss").get<std::string>();
    row.alpha = t.at("alpha").get<double>();
    row.lambda = t.at("lambda").get<double>();
    row.metrics = metrics_from_json(read_json(metrics_path));
    rows.push_back(std::move(row));
  }
  const auto text = report_text(rows);
  std::cout << text;
  if (out) {
    fs::create_directories(*out);
    write_text(*out / "report.txt", text);
    write_text(*out / "report.csv", report_csv(rows));
  }
}

// Re-runs the command recorded in a manifest into `out` and compares digests.
int run_replay(const fs::path& manifest_path, const fs::path& out) {
  const auto manifest = read_json(manifest_path);
  if (manifest.value("tool", "") != kToolName) {
    throw std::runtime_error(manifest_path.string() + " is not a riskloss manifest");
  }
  if (manifest.value("version", "") != kToolVersion) {
    warn("manifest written by version " + manifest.value("version", "?"));
  }
  const auto command = manifest.value("command", "");
  ordered_json replayed;
  fs::path artifact_dir = out;
  if (command == "gen-data") {
    const GenJob job{manifest.at("seed").get<std::uint64_t>(),
                     manifest.at("days").get<std::size_t>(),
                     jump_params_from_json(manifest.at("params"))};
    replayed = run_gen(job, out);
    // The artifact is keyed by file name, which may differ; compare digests.
    const auto recorded = manifest.at("artifacts").begin().value();
    const auto got = replayed.at("artifacts").begin().value();
    write_json(gen_manifest_path(out), replayed);
    if (recorded != got) {
      std::cerr << "mismatch: " << out.string() << '\n';
      return 1;
    }
    std::cout << "reproduced " << out.string() << '\n';
    return 0;
  }
  if (command == "train") {
    replayed = run_train(train_job_from_manifest(manifest), out);
  } else if (command == "ablate") {
    replayed = run_ablate(ablate_job_from_manifest(manifest), out);
  } else {
    throw std::runtime_error("cannot replay command '" + command + "'");
  }
  write_json(out / kManifestFile, replayed);
  int status = 0;
  for (const auto& [name, digest] : manifest.at("artifacts").items()) {
    const bool same = replayed.at("artifacts").value(name, "") == digest.get<std::string>();
    std::cout << (same ? "reproduced " : "MISMATCH ") << (artifact_dir / name).string() << '\n';
    if (!same) status = 1;
  }
  return status;
}

// ---- flag plumbing ----------------------------------------------------------

struct CommonFlags {
  std::string data;
  std::size_t window = 32;
  std::size_t horizon = 1;
  std::string splits = "0.7,0.15,0.15";
  std::string features = "close";
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t d_ff = 128;
  double dropout = 0.0;
  std::string loss = "mse";
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::size_t patience = 0;
  CLI::Option* patience_opt = nullptr;
  bool record_time = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--data", f.data, "Input price CSV")->required();
  cmd->add_option("--window", f.window, "Input window length W")->capture_default_str();
  cmd->add_option("--horizon", f.horizon, "Steps ahead to predict")->capture_default_str();
  cmd->add_option("--splits", f.splits, "train,val,test fractions")->capture_default_str();
  cmd->add_option("--features", f.features, "Comma-separated feature columns, close first")
      ->capture_default_str();
  cmd->add_option("--d-model", f.d_model)->capture_default_str();
  cmd->add_option("--heads", f.heads)->capture_default_str();
  cmd->add_option("--layers", f.layers)->capture_default_str();
  cmd->add_option("--d-ff", f.d_ff)->capture_default_str();
  cmd->add_option("--dropout", f.dropout)->capture_default_str();
  cmd->add_option("--loss", f.loss, "mse | var-mse | cvar-mse")->capture_default_str();
  cmd->add_option("--epochs", f.epochs)->capture_default_str();
  cmd->add_option("--batch-size", f.batch_size)->capture_default_str();
  cmd->add_option("--lr", f.lr)->capture_default_str();
  f.patience_opt = cmd->add_option("--patience", f.patience, "Early-stopping patience (epochs)");
  cmd->add_flag("--record-time", f.record_time, "Log wall-clock seconds per epoch");
}

void fill_common(const CommonFlags& f, fs::path& data, WindowOptions& window, ModelConfig& model,
                 TrainConfig& train) {
  data = f.data;
  window.window = f.window;
  window.horizon = f.horizon;
  window.splits = parse_splits(f.splits);
  window.features = split_list(f.features);
  model.d_model = f.d_model;
  model.heads = f.heads;
  model.layers = f.layers;
  model.d_ff = f.d_ff;
  model.dropout = f.dropout;
  train.loss.kind = validated([&] { return parse_loss_kind(f.loss); });
  train.epochs = f.epochs;
  train.batch_size = f.batch_size;
  train.lr = f.lr;
  if (f.patience_opt->count() > 0) {
    train.patience = f.patience;
  }
  train.record_wall_time = f.record_time;
  validated([&] { return train.validate(); });
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Risk-aware training and evaluation for price forecasting transformers"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic jump-diffusion price series");
  GenJob gen_job;
  std::string gen_out;
  gen->add_option("--seed", gen_job.seed)->capture_default_str();
  gen->add_option("--days", gen_job.days)->required();
  gen->add_option("--out", gen_out, "Output CSV path")->required();
  gen->add_option("--mu", gen_job.params.mu)->capture_default_str();
  gen->add_option("--sigma", gen_job.params.sigma)->capture_default_str();
  gen->add_option("--jump-prob", gen_job.params.jump_prob)->capture_default_str();
  gen->add_option("--jump-mean", gen_job.params.jump_mean)->capture_default_str();
  gen->add_option("--jump-std", gen_job.params.jump_std)->capture_default_str();
  gen->add_option("--s0", gen_job.params.s0)->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a run directory");
  CommonFlags train_flags;
  add_common(train_cmd, train_flags);
  double alpha = 0.95;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  std::string train_out, init;
  train_cmd->add_option("--alpha", alpha, "Confidence level")->capture_default_str();
  auto* lambda_opt =
      train_cmd->add_option("--lambda", lambda, "Risk term weight")->capture_default_str();
  train_cmd->add_option("--seed", seed, "Model init and shuffle seed")->capture_default_str();
  train_cmd->add_option("--init", init, "Start from this checkpoint (fine-tuning)");
  train_cmd->add_option("--out", train_out, "Run directory")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a trained run on one split");
  std::string eval_run, eval_split = "test";
  double eval_tail = 0.05;
  eval_cmd->add_option("--run", eval_run, "Run directory")->required();
  eval_cmd->add_option("--split", eval_split, "train | val | test")->capture_default_str();
  eval_cmd->add_option("--tail", eval_tail, "Extreme-subset tail fraction")->capture_default_str();

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep alpha x lambda x seeds");
  CommonFlags ablate_flags;
  ablate_flags.loss = "cvar-mse";
  add_common(ablate_cmd, ablate_flags);
  std::string grid_alpha = "0.5:1.0:0.05", grid_lambda = "0:2:0.25", ablate_out;
  std::string ablate_split = "test";
  std::size_t seeds = 3;
  std::uint64_t first_seed = 0;
  double ablate_tail = 0.05;
  ablate_cmd->add_option("--grid-alpha", grid_alpha)->capture_default_str();
  ablate_cmd->add_option("--grid-lambda", grid_lambda)->capture_default_str();
  ablate_cmd->add_option("--seeds", seeds, "Seeds per grid cell")->capture_default_str();
  ablate_cmd->add_option("--seed", first_seed, "First seed")->capture_default_str();
  ablate_cmd->add_option("--split", ablate_split)->capture_default_str();
  ablate_cmd->add_option("--tail", ablate_tail)->capture_default_str();
  ablate_cmd->add_option("--out", ablate_out, "Output directory")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "Compare evaluated runs");
  std::vector<std::string> report_runs;
  std::string report_split = "test", report_out;
  report_cmd->add_option("--runs", report_runs, "Run directories")->required();
  report_cmd->add_option("--split", report_split)->capture_default_str();
  report_cmd->add_option("--out", report_out, "Also write report.txt and report.csv here");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and verify its outputs");
  std::string replay_manifest, replay_out;
  replay_cmd->add_option("--manifest", replay_manifest)->required();
  replay_cmd->add_option("--out", replay_out, "Output directory (CSV path for gen-data)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      validated([&] {
        gen_job.params.validate();
        return 0;
      });
      const fs::path out(gen_out);
      write_json(gen_manifest_path(out), run_gen(gen_job, out));
    } else if (train_cmd->parsed()) {
      TrainJob job;
      fill_common(train_flags, job.data, job.window, job.model, job.train);
      job.train.loss.alpha = alpha;
      job.train.loss.lambda = lambda;
      if (job.train.loss.kind == LossKind::Mse) {
        if (lambda_opt->count() > 0 && lambda != 0.0) {
          warn("lambda ignored for mse");
        }
        job.train.loss.lambda = 0.0;
      }
      job.train.seed = seed;
      job.model.seed = seed;
      if (!init.empty()) {
        job.init = init;
      }
      validate_train_job(job);
      const fs::path out(train_out);
      const auto manifest = run_train(job, out);
      write_json(out / kManifestFile, manifest);
    } else if (eval_cmd->parsed()) {
      const auto split = validated([&] { return parse_split(eval_split); });
      validated([&] { return tail_count(1, eval_tail); });
      run_evaluate(eval_run, split, eval_tail);
    } else if (ablate_cmd->parsed()) {
      AblateJob job;
      fill_common(ablate_flags, job.data, job.window, job.model, job.train);
      job.alphas = validated([&] { return parse_grid(grid_alpha); });
      job.lambdas = validated([&] { return parse_grid(grid_lambda); });
      for (std::size_t s = 0; s < seeds; ++s) job.seeds.push_back(first_seed + s);
      job.split = validated([&] { return parse_split(ablate_split); });
      job.tail = ablate_tail;
      validated([&] { return tail_count(1, ablate_tail); });
      validate_ablate_job(job);
      const fs::path out(ablate_out);
      const auto manifest = run_ablate(job, out);
      write_json(out / kManifestFile, manifest);
    } else if (report_cmd->parsed()) {
      const auto split = validated([&] { return parse_split(report_split); });
      run_report(report_runs, split,
                 report_out.empty() ? std::nullopt : std::optional<fs::path>(report_out));
    } else if (replay_cmd->parsed()) {
      return run_replay(replay_manifest, replay_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace riskloss::cli

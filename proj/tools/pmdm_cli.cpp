// pmdm: train / evaluate / predict / benchmark entry points around the
// PM-DMNet library. All file outputs land under --out with fixed names.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pmdm/checkpoint.hpp"
#include "pmdm/dgc.hpp"
#include "pmdm/flops.hpp"
#include "pmdm/metrics.hpp"
#include "pmdm/runconfig.hpp"

namespace fs = std::filesystem;
using namespace pmdm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoul(item));
  }
  if (out.empty()) throw std::invalid_argument("empty size list");
  return out;
}

SplitSpec parse_split(const std::string& text) {
  std::stringstream ss(text);
  std::string item;
  std::vector<double> parts;
  while (std::getline(ss, item, ',')) parts.push_back(std::stod(item));
  if (parts.size() != 3)
    throw std::invalid_argument("split must be three comma-separated ratios");
  return SplitSpec{parts[0], parts[1], parts[2]};
}

std::string matrix_csv(const Tensor& t) {
  if (t.rank() != 2) throw std::logic_error("matrix_csv: rank-2 only");
  const std::size_t rows = t.extent(0), cols = t.extent(1);
  std::ostringstream os;
  os << "# shape: " << rows << ' ' << cols << '\n';
  char buf[40];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", t.values()[r * cols + c]);
      os << buf << (c + 1 < cols ? "," : "\n");
    }
  }
  return os.str();
}

struct LoadedModel {
  ModelConfig config;
  std::unique_ptr<PmDmNet> model;
};

LoadedModel load_model(const std::string& checkpoint_path) {
  const fs::path ckpt(checkpoint_path);
  const fs::path cfg_path = ckpt.parent_path() / "model_config.json";
  LoadedModel out;
  out.config = model_config_from_file(cfg_path.string());
  out.model = std::make_unique<PmDmNet>(out.config, /*seed=*/0);
  load_checkpoint(out.model->params(), checkpoint_path);
  return out;
}

SplitSpec split_for_checkpoint(const std::string& checkpoint_path,
                               const std::optional<std::string>& split_flag) {
  if (split_flag) return parse_split(*split_flag);
  const fs::path run_cfg =
      fs::path(checkpoint_path).parent_path() / "run_config.json";
  if (fs::exists(run_cfg))
    return RunConfig::from_json_file(run_cfg.string()).split;
  return SplitSpec{};
}

void check_dataset_match(const ModelConfig& config,
                         const TrafficSeries& series) {
  if (config.nodes != series.nodes())
    throw std::invalid_argument(
        "checkpoint was trained on N=" + std::to_string(config.nodes) +
        " nodes but the dataset has N=" + std::to_string(series.nodes()));
  if (config.channels != series.channels())
    throw std::invalid_argument(
        "checkpoint expects C=" + std::to_string(config.channels) +
        " channels but the dataset has C=" + std::to_string(series.channels()));
  if (config.interval_minutes != series.interval_minutes)
    throw std::invalid_argument(
        "checkpoint interval " + std::to_string(config.interval_minutes) +
        " min differs from dataset interval " +
        std::to_string(series.interval_minutes) + " min");
}

int cmd_train(const RunConfig& run_in) {
  RunConfig run = run_in;
  if (run.dataset.empty())
    throw std::invalid_argument("train: missing 'dataset' path");
  TrafficSeries series = load_dataset(run.dataset);
  run.model.nodes = series.nodes();
  run.model.channels = series.channels();
  run.model.interval_minutes = series.interval_minutes;
  run.model.validate();

  WindowSet windows = make_windows(series, run.model.history,
                                   run.model.horizon);
  SplitWindows splits = split(windows, run.split);
  Normalizer normalizer = fit_normalizer(series, splits);

  PmDmNet model(run.model, run.train.seed);
  std::fprintf(stderr, "training %s model: N=%zu C=%zu windows=%zu params=%zu\n",
               to_string(run.model.mode).c_str(), series.nodes(),
               series.channels(), windows.size(),
               model.params().value_count());
  FitResult result = fit(model, series, splits, run.train, normalizer);

  const fs::path out(run.out_dir);
  fs::create_directories(out);
  save_checkpoint(model.params(), (out / "checkpoint.pmdm").string());
  write_text(out / "model_config.json", model_config_json(run.model));
  write_text(out / "run_config.json", run.to_json_text());
  write_text(out / "history.csv", history_csv(result.history));

  const ForecastSet test = predict_windows(model, series, splits.test,
                                           normalizer, run.train.batch_size);
  const EvalReport report = evaluate_forecasts(test.predictions, test.truth);
  write_text(out / "eval.csv", eval_report_csv(report));
  std::cout << "epochs: " << result.history.size()
            << (result.stopped_early ? " (early stop)" : "")
            << "  best val MAE: " << result.best_val_mae << "\n"
            << "test metrics:\n"
            << eval_report_table(report);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset,
             const std::optional<std::string>& split_flag,
             std::optional<std::string> out_dir) {
  LoadedModel loaded = load_model(checkpoint);
  TrafficSeries series = load_dataset(dataset);
  check_dataset_match(loaded.config, series);

  WindowSet windows = make_windows(series, loaded.config.history,
                                   loaded.config.horizon);
  SplitWindows splits = split(windows, split_for_checkpoint(checkpoint,
                                                            split_flag));
  Normalizer normalizer = fit_normalizer(series, splits);
  const ForecastSet test = predict_windows(*loaded.model, series, splits.test,
                                           normalizer);
  const EvalReport report = evaluate_forecasts(test.predictions, test.truth);
  const fs::path out =
      out_dir ? fs::path(*out_dir) : fs::path(checkpoint).parent_path();
  write_text(out / "eval.csv", eval_report_csv(report));
  std::cout << eval_report_table(report);
  return kExitOk;
}

int cmd_predict(const std::string& checkpoint, const std::string& dataset,
                std::size_t window_index,
                const std::optional<std::string>& split_flag,
                std::optional<std::string> out_dir) {
  LoadedModel loaded = load_model(checkpoint);
  TrafficSeries series = load_dataset(dataset);
  check_dataset_match(loaded.config, series);

  WindowSet windows = make_windows(series, loaded.config.history,
                                   loaded.config.horizon);
  if (window_index >= windows.size())
    throw std::invalid_argument("predict: window " +
                                std::to_string(window_index) +
                                " out of range (have " +
                                std::to_string(windows.size()) + ")");
  SplitWindows splits = split(windows, split_for_checkpoint(checkpoint,
                                                            split_flag));
  Normalizer normalizer = fit_normalizer(series, splits);

  NoGradGuard guard;
  Batch batch = assemble_batch(series, windows, {window_index});
  Tensor pred = normalizer.denormalize(loaded.model->forward(
      normalizer.normalize(batch.x), batch.time));

  std::ostringstream os;
  os << "step,node,channel,prediction,truth\n";
  const std::size_t m = pred.extent(1), N = pred.extent(2), C = pred.extent(3);
  char buf[96];
  for (std::size_t q = 0; q < m; ++q)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t at = (q * N + i) * C + c;
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.17g,%.17g\n", q + 1, i,
                      c, pred.values()[at], batch.y.values()[at]);
        os << buf;
      }
  const fs::path out =
      out_dir ? fs::path(*out_dir) : fs::path(checkpoint).parent_path();
  write_text(out / "predictions.csv", os.str());
  std::cout << "wrote " << (out / "predictions.csv").string() << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& sizes_text, const std::string& kinds_text,
              std::size_t trials, bool flops_only, const FlopDims& dims,
              std::uint64_t seed, const std::string& out_dir) {
  const std::vector<std::size_t> sizes = parse_size_list(sizes_text);
  std::vector<CellKind> kinds;
  {
    std::stringstream ss(kinds_text);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) kinds.push_back(cell_kind_from_string(item));
  }
  if (kinds.empty()) throw std::invalid_argument("bench: no kinds given");
  const auto rows = bench_scaling(sizes, kinds, dims, trials, flops_only, seed);
  write_text(fs::path(out_dir) / "bench.csv", bench_csv(rows));
  std::cout << bench_table(rows);
  return kExitOk;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
  TrafficSeries series = make_synthetic(spec);
  save_dataset(series, out_dir);
  std::cout << "wrote " << out_dir << ": T=" << series.steps()
            << " N=" << series.nodes() << " C=" << series.channels() << "\n";
  return kExitOk;
}

int cmd_export_embeddings(const std::string& checkpoint,
                          const std::string& out_dir) {
  LoadedModel loaded = load_model(checkpoint);
  const fs::path dir = fs::path(out_dir) / "embeddings";
  fs::create_directories(dir);
  const ParamStore& store = loaded.model->params();
  std::size_t written = 0;
  for (const std::string& name : store.names()) {
    const bool embedding =
        name == "time.day_pool" || name == "time.week_pool" ||
        name.ends_with(".E") || name.ends_with(".P");
    if (!embedding) continue;
    std::string file = name;
    for (char& ch : file)
      if (ch == '.') ch = '_';
    write_text(dir / (file + ".csv"), matrix_csv(store.get(name)));
    ++written;
  }
  std::cout << "wrote " << written << " embedding files to " << dir.string()
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PM-DMNet: dual-mode pattern-matching traffic forecaster"};
  app.require_subcommand(1);

  // ---- train ----
  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  std::string config_path;
  train->add_option("--config", config_path, "Run configuration JSON file");
  std::optional<std::string> o_mode, o_dataset, o_out, o_split;
  std::optional<std::size_t> o_history, o_horizon, o_hidden, o_p, o_d, o_slots,
      o_layers, o_batch, o_epochs, o_patience;
  std::optional<double> o_lr, o_ss_decay, o_grad_clip, o_noiseunused;
  std::optional<std::uint64_t> o_seed;
  std::optional<bool> o_no_decoder, o_no_tam, o_no_dmn, o_no_napl, o_gate_bias,
      o_project;
  bool verbose = false;
  train->add_option("--mode", o_mode, "parallel | recursive");
  train->add_option("--dataset", o_dataset, "Dataset directory");
  train->add_option("--out", o_out, "Output directory");
  train->add_option("--split", o_split, "Train/val/test ratios, e.g. 7,1,2");
  train->add_option("--history", o_history, "Input steps n");
  train->add_option("--horizon", o_horizon, "Predicted steps m");
  train->add_option("--hidden", o_hidden, "Hidden width D");
  train->add_option("--embed-p", o_p, "Time/memory embedding width p");
  train->add_option("--embed-d", o_d, "Node embedding width d");
  train->add_option("--memory-slots", o_slots, "Memory slots M");
  train->add_option("--layers", o_layers, "Encoder layers");
  train->add_option("--batch-size", o_batch, "Batch size");
  train->add_option("--max-epochs", o_epochs, "Epoch limit");
  train->add_option("--patience", o_patience, "Early-stopping patience");
  train->add_option("--lr", o_lr, "Learning rate");
  train->add_option("--ss-decay", o_ss_decay, "Scheduled-sampling constant c");
  train->add_option("--grad-clip", o_grad_clip, "Global-norm clip (0 = off)");
  train->add_option("--seed", o_seed, "RNG seed");
  train->add_option("--no-decoder", o_no_decoder, "Ablation: direct MLP head");
  train->add_option("--no-tam", o_no_tam, "Ablation: skip transfer attention");
  train->add_option("--no-dmn", o_no_dmn, "Ablation: affine gates");
  train->add_option("--no-napl", o_no_napl, "Ablation: shared theta");
  train->add_option("--gate-bias", o_gate_bias, "Per-gate additive bias");
  train->add_option("--project-patterns", o_project,
                    "Learnable pattern readout (off = raw memory rows)");
  train->add_flag("--verbose", verbose, "Log per-epoch metrics to stderr");

  // ---- eval / predict ----
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string e_checkpoint, e_dataset;
  std::optional<std::string> e_split, e_out;
  eval->add_option("--checkpoint", e_checkpoint, "checkpoint.pmdm path")
      ->required();
  eval->add_option("--dataset", e_dataset, "Dataset directory")->required();
  eval->add_option("--split", e_split, "Ratios used at training time");
  eval->add_option("--out", e_out, "Output directory");

  auto* predict = app.add_subcommand("predict", "Forecast one window");
  std::string p_checkpoint, p_dataset;
  std::size_t p_window = 0;
  std::optional<std::string> p_split, p_out;
  predict->add_option("--checkpoint", p_checkpoint, "checkpoint.pmdm path")
      ->required();
  predict->add_option("--dataset", p_dataset, "Dataset directory")->required();
  predict->add_option("--window", p_window, "Window index");
  predict->add_option("--split", p_split, "Ratios used at training time");
  predict->add_option("--out", p_out, "Output directory");

  // ---- bench ----
  auto* bench = app.add_subcommand(
      "bench", "FLOP counts and wall times for DMN vs DGC cell steps");
  std::string b_sizes = "250,500,1000,2000", b_kinds = "dmn,dgc",
              b_out = "out";
  std::size_t b_trials = 5;
  bool b_flops_only = false;
  FlopDims b_dims;
  std::size_t b_channels = 1;
  std::uint64_t b_seed = 1;
  bench->add_option("--sizes", b_sizes, "Comma-separated node counts");
  bench->add_option("--kinds", b_kinds, "Comma-separated: dmn,dgc");
  bench->add_option("--trials", b_trials, "Timed trials per point (>= 5)");
  bench->add_flag("--flops-only", b_flops_only, "Skip timing");
  bench->add_option("--hidden", b_dims.out_width, "Hidden width D");
  bench->add_option("--embed-p", b_dims.p, "Embedding width p");
  bench->add_option("--embed-d", b_dims.embed_d, "Node embedding width d");
  bench->add_option("--memory-slots", b_dims.slots, "Memory slots M");
  bench->add_option("--channels", b_channels, "Input channels C");
  bench->add_option("--seed", b_seed, "RNG seed");
  bench->add_option("--out", b_out, "Output directory");

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthSpec s_spec;
  std::string s_out = "data/synth";
  synth->add_option("--nodes", s_spec.nodes, "Node count");
  synth->add_option("--days", s_spec.days, "Days of data");
  synth->add_option("--interval", s_spec.interval_minutes, "Step minutes");
  synth->add_option("--clusters", s_spec.clusters, "Node clusters");
  synth->add_option("--channels", s_spec.channels, "Channels");
  synth->add_option("--noise", s_spec.noise, "Gaussian noise level");
  synth->add_option("--seed", s_spec.seed, "RNG seed");
  synth->add_option("--start", s_spec.start, "First timestamp");
  synth->add_option("--out", s_out, "Dataset directory");

  // ---- export-embeddings ----
  auto* exp = app.add_subcommand("export-embeddings",
                                 "Dump E / P / time pools as CSV");
  std::string x_checkpoint, x_out;
  exp->add_option("--checkpoint", x_checkpoint, "checkpoint.pmdm path")
      ->required();
  exp->add_option("--out", x_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      RunConfig run = config_path.empty()
                          ? RunConfig{}
                          : RunConfig::from_json_file(config_path);
      if (o_mode) run.model.mode = mode_from_string(*o_mode);
      if (o_history) run.model.history = *o_history;
      if (o_horizon) run.model.horizon = *o_horizon;
      if (o_hidden) run.model.hidden = *o_hidden;
      if (o_p) run.model.embed_p = *o_p;
      if (o_d) run.model.embed_d = *o_d;
      if (o_slots) run.model.memory_slots = *o_slots;
      if (o_layers) run.model.layers = *o_layers;
      if (o_no_decoder) run.model.no_decoder = *o_no_decoder;
      if (o_no_tam) run.model.no_tam = *o_no_tam;
      if (o_no_dmn) run.model.no_dmn = *o_no_dmn;
      if (o_no_napl) run.model.no_napl = *o_no_napl;
      if (o_gate_bias) run.model.gate_bias = *o_gate_bias;
      if (o_project) run.model.project_patterns = *o_project;
      if (o_lr) run.train.lr = *o_lr;
      if (o_batch) run.train.batch_size = *o_batch;
      if (o_epochs) run.train.max_epochs = *o_epochs;
      if (o_patience) run.train.patience = *o_patience;
      if (o_ss_decay) run.train.ss_decay = *o_ss_decay;
      if (o_grad_clip) run.train.grad_clip = *o_grad_clip;
      if (o_seed) run.train.seed = *o_seed;
      if (o_dataset) run.dataset = *o_dataset;
      if (o_out) run.out_dir = *o_out;
      if (o_split) run.split = parse_split(*o_split);
      run.train.verbose = verbose;
      return cmd_train(run);
    }
    if (*eval) return cmd_eval(e_checkpoint, e_dataset, e_split, e_out);
    if (*predict)
      return cmd_predict(p_checkpoint, p_dataset, p_window, p_split, p_out);
    if (*bench) {
      b_dims.in_width = b_channels + b_dims.out_width;
      return cmd_bench(b_sizes, b_kinds, b_trials, b_flops_only, b_dims,
                       b_seed, b_out);
    }
    if (*synth) return cmd_synth(s_spec, s_out);
    if (*exp) return cmd_export_embeddings(x_checkpoint, x_out);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

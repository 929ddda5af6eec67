// SPDX-License-Identifier: Apache-2.0
//
// mpogpt: train, compress, sweep and sample character-level GPT models whose
// linear layers are dense or MPO chains.
//
// Exit codes: 0 success, 1 usage or input error, 2 numeric failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mpogpt/data.hpp"
#include "mpogpt/errors.hpp"
#include "mpogpt/io.hpp"
#include "mpogpt/model.hpp"
#include "mpogpt/train.hpp"

namespace fs = std::filesystem;
using namespace mpogpt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool g_quiet = false;

void log_line(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

fs::path locate(const std::string& path, const fs::path& config_dir) {
  fs::path p(path);
  if (p.is_absolute() || fs::exists(p) || config_dir.empty()) return p;
  fs::path alt = config_dir / p;
  return fs::exists(alt) ? alt : p;
}

SplitCorpus load_corpus(const CorpusConfig& cfg, const fs::path& config_dir) {
  fs::path path = resolve_corpus_path(locate(cfg.path, config_dir));
  if (!fs::exists(path) && !cfg.url.empty()) {
    if (cfg.sha256.empty()) throw InputError("corpus.url requires corpus.sha256");
    log_line("fetching corpus from " + cfg.url);
    fetch_corpus(cfg.url, cfg.sha256, path);
  }
  auto corpus = split_corpus(read_text_file(path));
  log_line("corpus " + path.string() + ": " + std::to_string(corpus.train.size() + corpus.val.size()) +
           " chars, vocab " + std::to_string(corpus.vocab.size()));
  return corpus;
}

/// A model vocab of 0 means "take it from the corpus".
void bind_vocab(ModelConfig& model, const SplitCorpus& corpus) {
  if (model.vocab == 0) model.vocab = corpus.vocab.size();
  if (model.vocab != corpus.vocab.size()) {
    throw InputError("model.vocab is " + std::to_string(model.vocab) + " but the corpus has " +
                     std::to_string(corpus.vocab.size()) + " symbols");
  }
  model.validate();
}

/// Streams metrics.csv so a crashed or diverged run still leaves its rows.
class MetricsWriter {
 public:
  explicit MetricsWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw InputError("cannot write '" + path.string() + "'");
    out_ << metrics_csv_header() << std::flush;
  }
  MetricsObserver observer(std::string tag) {
    return [this, tag = std::move(tag)](const MetricsRecord& r) {
      out_ << metrics_csv_row(r) << std::flush;
      char buf[160];
      std::snprintf(buf, sizeof buf, "[%s] step %5zu  train %.4f  val %.4f  acc %.4f  lr %.2e  (%.1fs)", tag.c_str(),
                    r.step, r.train_loss, r.val_loss, r.val_acc, r.lr, r.wall_clock);
      log_line(buf);
    };
  }

 private:
  std::ofstream out_;
};

RunConfig resolve_config(const std::string& path, fs::path& config_dir) {
  if (path.empty()) return RunConfig{};
  config_dir = fs::path(path).parent_path();
  return load_run_config(path);
}

void write_snapshot(const fs::path& path, RunConfig cfg, const SplitCorpus& corpus, const fs::path& corpus_path) {
  cfg.model.vocab = corpus.vocab.size();
  cfg.corpus.path = corpus_path.string();
  write_file_atomic(path, to_json(cfg));
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string mode;
  std::optional<std::size_t> chi;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  fs::path config_dir;
  RunConfig cfg = resolve_config(a.config, config_dir);
  if (!a.mode.empty()) cfg.model.mode = parse_linear_mode(a.mode);
  if (!a.mode.empty() && cfg.model.mode == LinearMode::kMpo && !a.chi) {
    throw UsageError("--chi is required with --mode mpo");
  }
  if (a.chi) {
    if (cfg.model.mode != LinearMode::kMpo) throw UsageError("--chi is only valid with --mode mpo");
    if (*a.chi < 1) throw UsageError("--chi must be >= 1");
    cfg.model.chi = *a.chi;
  }
  if (a.steps) {
    cfg.train.steps = *a.steps;
    cfg.train.warmup = std::min(cfg.train.warmup, cfg.train.steps);
  }
  if (a.seed) cfg.train.seed = *a.seed;
  cfg.train.validate();

  auto corpus = load_corpus(cfg.corpus, config_dir);
  bind_vocab(cfg.model, corpus);
  fs::path out(a.out);
  fs::create_directories(out);
  write_snapshot(out / "config.json", cfg, corpus, resolve_corpus_path(locate(cfg.corpus.path, config_dir)));

  auto model = TransformerF::init(cfg.model, cfg.train.seed);
  log_line(std::string("model ") + to_string(cfg.model.mode) + ": " + std::to_string(model.param_count()) +
           " parameters");
  MetricsWriter metrics(out / "metrics.csv");
  auto result = train(std::move(model), corpus, cfg.train, metrics.observer(to_string(cfg.model.mode)));
  if (result.diverged) throw NumericFailure("training diverged at " + result.diagnostic);
  save_checkpoint(out / "checkpoint.bin", result.model, cfg.train, corpus.vocab);
  log_line("wrote " + (out / "checkpoint.bin").string());
  return kExitOk;
}

// ---- compress -----------------------------------------------------------

struct CompressArgs {
  std::string checkpoint;
  std::size_t chi = 0;
  std::size_t finetune = 0;
  bool eval = false;
  std::string corpus;
  std::string out;
};

int cmd_compress(const CompressArgs& a) {
  if (a.chi < 1) throw UsageError("--chi must be >= 1");
  auto ckpt = load_checkpoint(a.checkpoint);
  if (ckpt.model.config().mode != LinearMode::kDense) {
    throw UsageError("'" + a.checkpoint + "' already holds an MPO model; compress expects a dense checkpoint");
  }
  fs::path out(a.out);
  fs::create_directories(out);

  auto compressed = compress_model(ckpt.model, a.chi);
  write_layer_errors_csv(out / "layer_errors.csv", compressed.layers);
  double max_err = 0.0;
  for (const auto& l : compressed.layers) max_err = std::max(max_err, l.rel_err);
  log_line("chi " + std::to_string(a.chi) + ": max layer rel. error " + format_double(max_err) + ", " +
           std::to_string(compressed.model.param_count()) + " parameters (dense " +
           std::to_string(ckpt.model.param_count()) + ")");

  TrainConfig tcfg = ckpt.train;
  TransformerF model = std::move(compressed.model);
  if (a.finetune > 0 || a.eval) {
    CorpusConfig cc;
    if (!a.corpus.empty()) cc.path = a.corpus;
    auto corpus = load_corpus(cc, {});
    if (corpus.vocab.chars() != ckpt.vocab.chars()) throw InputError("corpus vocabulary differs from the checkpoint's");
    auto before = evaluate(model, corpus.val, tcfg, tcfg.eval_seed);
    auto dense = evaluate(ckpt.model, corpus.val, tcfg, tcfg.eval_seed);
    log_line("val loss: dense " + format_double(dense.loss) + ", compressed " + format_double(before.loss));
    if (a.finetune > 0) {
      tcfg.steps = a.finetune;
      tcfg.warmup = std::min(tcfg.warmup, tcfg.steps);
      MetricsWriter metrics(out / "metrics.csv");
      auto run = train(std::move(model), corpus, tcfg, metrics.observer("chi " + std::to_string(a.chi)));
      if (run.diverged) throw NumericFailure("finetuning diverged at " + run.diagnostic);
      model = std::move(run.model);
    }
  }
  save_checkpoint(out / "checkpoint.bin", model, tcfg, ckpt.vocab);
  log_line("wrote " + (out / "checkpoint.bin").string());
  return kExitOk;
}

// ---- sweep --------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::vector<std::size_t> chis;
  std::optional<std::size_t> steps;
  std::string out;
};

int cmd_sweep(const SweepArgs& a) {
  fs::path config_dir;
  RunConfig cfg = resolve_config(a.config, config_dir);
  if (!a.chis.empty()) cfg.chis = a.chis;
  for (auto chi : cfg.chis) {
    if (chi < 1) throw UsageError("--chis entries must be >= 1");
  }
  if (a.steps) {
    cfg.train.steps = *a.steps;
    cfg.train.warmup = std::min(cfg.train.warmup, cfg.train.steps);
  }
  cfg.train.validate();
  auto corpus = load_corpus(cfg.corpus, config_dir);
  bind_vocab(cfg.model, corpus);
  fs::path out(a.out);
  fs::create_directories(out);
  write_snapshot(out / "config.json", cfg, corpus, resolve_corpus_path(locate(cfg.corpus.path, config_dir)));

  std::vector<SweepRow> rows;
  std::vector<LayerError> layers;
  bool failed = false;

  auto run_one = [&](const std::string& name, ModelConfig mcfg) {
    SweepRow row{name, to_string(mcfg.mode), mcfg.mode == LinearMode::kMpo ? mcfg.chi : 0};
    fs::path dir = out / name;
    try {
      fs::create_directories(dir);
      auto model = TransformerF::init(mcfg, cfg.train.seed);
      row.params = model.param_count();
      MetricsWriter metrics(dir / "metrics.csv");
      auto result = train(std::move(model), corpus, cfg.train, metrics.observer(name));
      const auto& last = result.metrics.back();
      row.val_loss = last.val_loss;
      row.val_acc = last.val_acc;
      if (result.diverged) {
        row.status = "diverged: " + result.diagnostic;
        failed = true;
      } else {
        save_checkpoint(dir / "checkpoint.bin", result.model, cfg.train, corpus.vocab);
        if (mcfg.mode == LinearMode::kDense) {
          for (auto chi : cfg.chis) {
            auto errs = reconstruction_errors(result.model, chi);
            layers.insert(layers.end(), errs.begin(), errs.end());
          }
          write_layer_errors_csv(out / "layer_errors.csv", layers);
        }
      }
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
      row.val_loss = row.val_acc = std::numeric_limits<double>::quiet_NaN();
      failed = true;
    }
    rows.push_back(row);
  };

  ModelConfig dense = cfg.model;
  dense.mode = LinearMode::kDense;
  run_one("dense", dense);
  for (auto chi : cfg.chis) {
    ModelConfig m = cfg.model;
    m.mode = LinearMode::kMpo;
    m.chi = chi;
    run_one("chi_" + std::to_string(chi), m);
  }
  finalize_sweep_rows(rows);
  write_sweep_csv(out / "report.csv", rows);
  write_sweep_json(out / "report.json", rows, layers);
  for (const auto& r : rows) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-8s params %8zu  ratio %6.3f  val loss %.4f  acc %.4f  gap %+.4f  %s",
                  r.name.c_str(), r.params, r.ratio, r.val_loss, r.val_acc, r.acc_gap, r.status.c_str());
    log_line(buf);
  }
  return failed ? kExitNumeric : kExitOk;
}

// ---- generate -----------------------------------------------------------

struct GenerateArgs {
  std::string checkpoint;
  std::string prompt;
  std::size_t length = 200;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.temperature < 0.0) throw UsageError("--temperature must be >= 0");
  auto ckpt = load_checkpoint(a.checkpoint);
  auto ids = ckpt.vocab.encode(a.prompt);
  std::mt19937_64 rng(a.seed);
  auto out = generate(ckpt.model, ids, a.length, a.temperature, rng);
  std::cout << ckpt.vocab.decode(out) << std::flush;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and compress character-level GPT models with MPO linear layers"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress output");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model from random initialization");
  train_cmd->add_option("--config", train_args.config, "Run config (JSON)")->check(CLI::ExistingFile);
  train_cmd->add_option("--mode", train_args.mode, "dense or mpo")->check(CLI::IsMember({"dense", "mpo"}));
  train_cmd->add_option("--chi", train_args.chi, "Bond dimension (mpo only)");
  train_cmd->add_option("--steps", train_args.steps, "Override train.steps");
  train_cmd->add_option("--seed", train_args.seed, "Override train.seed");
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();

  CompressArgs compress_args;
  auto* compress_cmd = app.add_subcommand("compress", "TT-SVD a dense checkpoint, optionally finetune");
  compress_cmd->add_option("--checkpoint", compress_args.checkpoint, "Dense checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  compress_cmd->add_option("--chi", compress_args.chi, "Bond dimension")->required();
  compress_cmd->add_option("--finetune", compress_args.finetune, "Finetuning steps after compression");
  compress_cmd->add_flag("--eval", compress_args.eval, "Report validation loss before finetuning");
  compress_cmd->add_option("--corpus", compress_args.corpus, "Corpus path for evaluation/finetuning");
  compress_cmd->add_option("--out", compress_args.out, "Output directory")->required();

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Dense baseline plus one MPO run per bond dimension");
  sweep_cmd->add_option("--config", sweep_args.config, "Run config (JSON)")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--chis", sweep_args.chis, "Bond dimensions, e.g. 4,8,16,32")->delimiter(',');
  sweep_cmd->add_option("--steps", sweep_args.steps, "Override train.steps");
  sweep_cmd->add_option("--out", sweep_args.out, "Output directory")->required();

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Sample text from a checkpoint");
  gen_cmd->add_option("--checkpoint", gen_args.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--prompt", gen_args.prompt, "Prompt text")->required();
  gen_cmd->add_option("--length", gen_args.length, "Characters to generate");
  gen_cmd->add_option("--temperature", gen_args.temperature, "0 for greedy decoding");
  gen_cmd->add_option("--seed", gen_args.seed, "Sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*compress_cmd) return cmd_compress(compress_args);
    if (*sweep_cmd) return cmd_sweep(sweep_args);
    if (*gen_cmd) return cmd_generate(gen_args);
  } catch (const NumericFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

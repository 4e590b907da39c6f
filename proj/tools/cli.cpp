// Copyright 2026  The narctc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>

#include "narctc/checkpoint.hpp"
#include "narctc/config.hpp"
#include "narctc/evalbench.hpp"
#include "narctc/hash.hpp"
#include "narctc/inference.hpp"
#include "narctc/parallel.hpp"
#include "narctc/synthetic.hpp"
#include "narctc/training.hpp"
#include "narctc/verify.hpp"

namespace narctc::cli {
namespace {

using FlagValues = std::map<std::string, std::string>;

void bind_key(CLI::App* app, const std::string& flag, const std::string& key, FlagValues& flags,
          const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&flags, key](const std::string& v) { flags[key] = v; }, help + " [" + key + "]");
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::string summary_line(const BenchReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s (batch %zu): %zu sentences in %.3f s, %.2f sent/s, %.2f tok/s, "
                "p50 %.3f ms, p90 %.3f ms, p99 %.3f ms, load %.3f s",
                r.mode.c_str(), r.batch_size, r.sentence_count, r.translate_seconds,
                r.sentences_per_second, r.tokens_per_second, r.p50_ms, r.p90_ms, r.p99_ms,
                r.load_seconds);
  return buf;
}

int cmd_vocab(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::filesystem::path> files{cfg.require_path("path.source")};
  if (auto t = cfg.get_path("path.target")) files.push_back(*t);
  const Vocabulary vocab =
      build_vocab(files, cfg.get_size("vocab.max_size"), cfg.get_size("vocab.min_freq"));
  const auto dest = cfg.require_path("path.vocab");
  vocab.save(dest);
  out << "wrote " << dest.string() << ": " << vocab.size() << " entries (hash "
      << hex_digest(vocab.hash()) << ")\n";
  return 0;
}

template <class T>
int train_with(const RunConfig& cfg, bool resume, std::ostream& out) {
  const Vocabulary vocab = Vocabulary::load(cfg.require_path("path.vocab"));
  const ParallelCorpus corpus =
      load_parallel_corpus(cfg.require_path("path.source"), cfg.require_path("path.target"), vocab);
  const TrainingConfig tcfg = cfg.training_config();
  const ModelConfig mcfg = cfg.model_config(vocab.size() - 1);
  const auto ckpt = cfg.require_path("path.checkpoint");

  std::optional<LoadedCheckpoint<T>> loaded;
  if (resume && std::filesystem::exists(ckpt)) {
    loaded.emplace(load_checkpoint<T>(ckpt));
    if (loaded->info.vocab_hash != vocab.hash()) {
      throw CheckpointError("cannot resume " + ckpt.string() + ": vocabulary differs");
    }
    if (!(loaded->info.model == mcfg)) {
      throw CheckpointError("cannot resume " + ckpt.string() + ": model config differs");
    }
  }
  Model<T> model = loaded ? std::move(loaded->model) : Model<T>(mcfg);
  OptimizerState<T> opt = loaded ? std::move(loaded->optimizer) : OptimizerState<T>::for_model(model);

  std::ofstream log_file;
  std::ostream* log = &out;
  if (auto p = cfg.get_path("path.log")) {
    log_file.open(*p, resume ? std::ios::app : std::ios::trunc);
    if (!log_file) throw IoError("cannot write training log " + p->string());
    log = &log_file;
  }

  CheckpointInfo info{mcfg, vocab.hash(), cfg.hash(), 0};
  auto save = [&] {
    info.step = opt.step_count;
    save_checkpoint(ckpt, model, &opt, info);
  };

  out << "training " << parameter_count(mcfg) << " parameters on " << corpus.pairs.size()
      << " pairs (" << corpus.dropped_empty_source << " empty sources dropped), config "
      << cfg.hash() << "\n";
  Trainer<T> trainer(model, opt, corpus, tcfg);
  StepMetrics last;
  trainer.run(std::nullopt, [&](const StepMetrics& m) {
    *log << to_json(m).dump() << '\n';
    last = m;
    if (tcfg.checkpoint_every && m.step % tcfg.checkpoint_every == 0) save();
  });
  log->flush();
  save();
  out << "step " << opt.step_count << ", last loss " << last.loss << ", "
      << trainer.skipped_pairs() << " infeasible pairs skipped per epoch; saved "
      << ckpt.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, bool resume, std::ostream& out) {
  if (cfg.get("train.precision") == "double") return train_with<double>(cfg, resume, out);
  return train_with<float>(cfg, resume, out);
}

DecodeJob make_job(const RunConfig& cfg) {
  DecodeJob job;
  job.lines = read_lines(cfg.require_path("path.input"));
  job.mode = parse_decode_mode(cfg.get("decode.mode"));
  job.batch_size = cfg.get_size("decode.batch_size");
  job.checkpoint = cfg.require_path("path.checkpoint");
  job.vocabulary = cfg.require_path("path.vocab");
  return job;
}

int cmd_translate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const DecodeJob job = make_job(cfg);
  const JobResult result = run_job(job);
  std::ostream* status = &err;
  if (auto p = cfg.get_path("path.output")) {
    write_lines(*p, result.outputs);
    status = &out;
  } else {
    for (const auto& l : result.outputs) out << l << '\n';
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "translated %zu lines (%s) in %.3f s, load %.3f s\n",
                result.outputs.size(), to_string(job.mode).c_str(), result.trace.translate_seconds,
                result.trace.load_seconds);
  *status << buf;
  return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  const DecodeJob job = make_job(cfg);
  const std::string hardware =
      cfg.get("bench.hardware").empty() ? describe_host() : cfg.get("bench.hardware");
  const std::string config_hash = read_checkpoint_info(job.checkpoint).config_hash;
  const BenchResult result = run_bench(job, cfg.get_size("bench.warmup"), hardware, config_hash);
  if (auto p = cfg.get_path("path.output")) write_lines(*p, result.translations);
  if (auto p = cfg.get_path("path.report")) save_report(*p, result.report);
  out << summary_line(result.report) << "\n";
  return 0;
}

int cmd_score(const std::string& hyp, const std::string& ref, std::ostream& out) {
  const auto h = read_lines(hyp);
  const auto r = read_lines(ref);
  const BleuStats stats = bleu_stats(h, r);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "BLEU = %.2f (%zu/%zu %zu/%zu %zu/%zu %zu/%zu, BP %.4f, hyp %zu, ref %zu), "
                "exact match %.4f\n",
                bleu(h, r), stats.matches[0], stats.totals[0], stats.matches[1], stats.totals[1],
                stats.matches[2], stats.totals[2], stats.matches[3], stats.totals[3],
                stats.brevity_penalty(), stats.hypothesis_length, stats.reference_length,
                exact_match_accuracy(h, r));
  out << buf;
  return 0;
}

int cmd_selfcheck(std::uint64_t seed, std::ostream& out) {
  std::size_t failed = 0;
  const auto results = run_selfcheck(seed, [&](const CheckResult& r) {
    out << format_result(r) << std::endl;
    failed += !r.passed;
  });
  out << (failed ? "selfcheck FAILED: " : "selfcheck passed: ") << results.size() - failed << "/"
      << results.size() << " checks\n";
  return failed ? 1 : 0;
}

int cmd_compare(const std::vector<std::string>& paths, std::ostream& out) {
  std::vector<BenchReport> reports;
  for (const auto& p : paths) reports.push_back(load_report(p));
  out << format_comparison(compare_runs(reports));
  return 0;
}

struct ToyOptions {
  std::string task = "reverse";
  std::string out_dir = ".";
  std::size_t train_pairs = 5000;
  std::size_t heldout_pairs = 500;
  std::size_t symbols = 16;
  std::size_t min_length = 3;
  std::size_t max_length = 10;
  std::uint64_t seed = 1;
};

int cmd_toy(const ToyOptions& o, std::ostream& out) {
  ToyTaskConfig cfg{parse_toy_task(o.task), o.symbols, o.min_length, o.max_length, o.seed};
  const ToyData data = generate_toy_data(cfg, o.train_pairs, o.heldout_pairs);
  const std::filesystem::path dir = o.out_dir;
  std::filesystem::create_directories(dir);
  write_lines(dir / "train.src", data.train.sources);
  write_lines(dir / "train.tgt", data.train.targets);
  write_lines(dir / "heldout.src", data.heldout.sources);
  write_lines(dir / "heldout.tgt", data.heldout.targets);
  toy_vocabulary(o.symbols).save(dir / "vocab.txt");
  out << "wrote " << to_string(cfg.task) << " task to " << dir.string() << ": "
      << o.train_pairs << " train, " << o.heldout_pairs << " held-out pairs\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Non-autoregressive CTC translation: train, translate, benchmark, verify."};
  app.name("narctc");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "narctc 0.1.0");

  FlagValues flags;
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path,
                 std::string("Config file of 'key = value' lines (default: $") + kConfigEnvVar + ")");
  bind_key(&app, "--threads", "threads", flags, "Worker thread cap");
  app.add_option("--set", overrides, "Override any config key: --set key=value");

  auto* vocab = app.add_subcommand("vocab", "Build a vocabulary from training text");
  bind_key(vocab, "--source", "path.source", flags, "Source-side text");
  bind_key(vocab, "--target", "path.target", flags, "Target-side text");
  bind_key(vocab, "--out", "path.vocab", flags, "Vocabulary file to write");
  bind_key(vocab, "--max-size", "vocab.max_size", flags, "Entries including reserved ids");
  bind_key(vocab, "--min-freq", "vocab.min_freq", flags, "Minimum token count");

  bool resume = false;
  auto* train = app.add_subcommand("train", "Train a model with the CTC loss");
  bind_key(train, "--source", "path.source", flags, "Source-side training text");
  bind_key(train, "--target", "path.target", flags, "Target-side training text");
  bind_key(train, "--vocab", "path.vocab", flags, "Vocabulary file");
  bind_key(train, "--checkpoint", "path.checkpoint", flags, "Checkpoint to write");
  bind_key(train, "--log", "path.log", flags, "JSON-lines training log (default stdout)");
  bind_key(train, "--steps", "train.total_steps", flags, "Optimizer steps");
  bind_key(train, "--lr", "train.base_lr", flags, "Peak learning rate");
  bind_key(train, "--warmup", "train.warmup", flags, "Warm-up steps");
  bind_key(train, "--batch-tokens", "train.batch_tokens", flags, "Padded source tokens per batch");
  bind_key(train, "--clip-norm", "train.clip_norm", flags, "Global gradient norm cap or 'none'");
  bind_key(train, "--checkpoint-every", "train.checkpoint_every", flags, "Steps between checkpoints");
  bind_key(train, "--seed", "train.seed", flags, "Batching seed");
  bind_key(train, "--precision", "train.precision", flags, "float or double");
  bind_key(train, "--d-model", "model.d_model", flags, "Model width");
  bind_key(train, "--heads", "model.n_heads", flags, "Attention heads");
  bind_key(train, "--d-ff", "model.d_ff", flags, "Feed-forward width");
  bind_key(train, "--enc-layers", "model.enc_layers", flags, "Encoder layers");
  bind_key(train, "--dec-layers", "model.dec_layers", flags, "Decoder layers");
  bind_key(train, "-k,--split", "model.k", flags, "Output frames per source token");
  bind_key(train, "--max-source-len", "model.max_source_len", flags, "Longest accepted source");
  train->add_flag("--resume", resume, "Continue from an existing checkpoint");

  auto add_decode_options = [&](CLI::App* sub) {
    bind_key(sub, "--checkpoint", "path.checkpoint", flags, "Model checkpoint");
    bind_key(sub, "--vocab", "path.vocab", flags, "Vocabulary file");
    bind_key(sub, "--input", "path.input", flags, "Source sentences, one per line");
    bind_key(sub, "--output", "path.output", flags, "Translations to write");
    auto* latency = sub->add_flag_callback(
        "--latency", [&flags] { flags["decode.mode"] = "latency"; },
        "One sentence per model call [decode.mode]");
    auto* batch = sub->add_option_function<std::string>(
        "--batch",
        [&flags](const std::string& n) {
          flags["decode.mode"] = "batched";
          flags["decode.batch_size"] = n;
        },
        "Sentences per model call [decode.batch_size]");
    latency->excludes(batch);
  };
  auto* translate = app.add_subcommand("translate", "Translate a file");
  add_decode_options(translate);
  auto* bench = app.add_subcommand("bench", "Time translation of a file");
  add_decode_options(bench);
  bind_key(bench, "--warmup", "bench.warmup", flags, "Untimed leading sentences");
  bind_key(bench, "--report", "path.report", flags, "JSON report to write");
  bind_key(bench, "--hardware", "bench.hardware", flags, "Hardware note (default: detected CPU)");

  std::string hyp, ref;
  auto* score = app.add_subcommand("score", "Corpus BLEU of translations against references");
  score->add_option("--hyp", hyp, "Translations")->required();
  score->add_option("--ref", ref, "References")->required();

  std::uint64_t check_seed = 1;
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the CTC and gradient verification suite");
  selfcheck->add_option("--seed", check_seed, "Seed for random instances");

  std::vector<std::string> report_paths;
  auto* compare = app.add_subcommand("compare", "Tabulate bench reports against the first one");
  compare->add_option("reports", report_paths, "Report files")->required()->expected(2, -1);

  ToyOptions toy_opts;
  auto* toy = app.add_subcommand("toy", "Write a synthetic copy or reversal corpus");
  toy->add_option("--task", toy_opts.task, "copy or reverse");
  toy->add_option("--out-dir", toy_opts.out_dir, "Directory for the corpus files");
  toy->add_option("--train-pairs", toy_opts.train_pairs, "Training pairs");
  toy->add_option("--heldout-pairs", toy_opts.heldout_pairs, "Held-out pairs");
  toy->add_option("--symbols", toy_opts.symbols, "Alphabet size");
  toy->add_option("--min-length", toy_opts.min_length, "Shortest sequence");
  toy->add_option("--max-length", toy_opts.max_length, "Longest sequence");
  toy->add_option("--seed", toy_opts.seed, "Generator seed");

  auto* show = app.add_subcommand("config", "Print the effective configuration and its sources");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "narctc: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    RunConfig cfg;
    if (config_path.empty()) {
      if (const char* env = std::getenv(kConfigEnvVar); env && *env) config_path = env;
    }
    if (!config_path.empty()) cfg.apply_file(config_path);
    for (const auto& [k, v] : flags) cfg.set(k, v, ValueSource::kFlag);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      cfg.set(o.substr(0, eq), o.substr(eq + 1), ValueSource::kFlag);
    }
    set_max_threads(cfg.get_size("threads"));

    if (*vocab) return cmd_vocab(cfg, out);
    if (*train) return cmd_train(cfg, resume, out);
    if (*translate) return cmd_translate(cfg, out, err);
    if (*bench) return cmd_bench(cfg, out);
    if (*score) return cmd_score(hyp, ref, out);
    if (*selfcheck) return cmd_selfcheck(check_seed, out);
    if (*compare) return cmd_compare(report_paths, out);
    if (*toy) return cmd_toy(toy_opts, out);
    if (*show) {
      out << cfg.describe() << "config.hash = " << cfg.hash() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "narctc: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace narctc::cli

// Command-line front end: train, eval, sweep-t, inspect, gradcheck, gen-synth.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "darer/config.hpp"
#include "darer/gradcheck_suite.hpp"
#include "darer/inspect.hpp"
#include "darer/report.hpp"
#include "darer/run.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace darer;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Run configuration file (key = value lines)");
  cmd->add_option("--set", o.overrides, "Override a config key, KEY=VALUE (repeatable)")->expected(1, -1);
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out", o.out, "Output directory (default: $DARER_OUT_DIR or ./runs)");
  cmd->add_option("--data", o.data, "Corpus directory (overrides data_dir)");
}

fs::path out_dir(const CommonOptions& o) {
  fs::path dir;
  if (!o.out.empty()) dir = o.out;
  else if (const char* env = std::getenv("DARER_OUT_DIR"); env && *env) dir = env;
  else dir = "runs";
  fs::create_directories(dir);
  return dir;
}

RunConfig run_config(const CommonOptions& o) {
  std::optional<fs::path> path;
  if (!o.config.empty()) path = o.config;
  RunConfig rc = load_run_config(path, o.overrides);
  if (o.seed) rc.train.seed = *o.seed;
  if (!o.data.empty()) rc.data_dir = o.data;
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

PreparedData load_data(const std::string& dir) {
  if (dir.empty()) throw ConfigError("no corpus directory: set data_dir or pass --data");
  return prepare_data(load_corpus(dir));
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << v;
  return s.str();
}

void log_epoch(const EpochRecord& r) {
  std::cerr << "epoch " << r.epoch << "  loss " << fmt(r.train_loss.total) << "  dev f1_s "
            << fmt(r.dev.f1_s) << "  f1_a " << fmt(r.dev.f1_a) << "  acc_s "
            << fmt(r.dev.sentiment.accuracy) << "  acc_a " << fmt(r.dev.act.accuracy)
            << (r.best ? "  *" : "") << "\n";
}

// Trains one model, streaming history lines to `history` when given.
struct TrainedRun {
  std::unique_ptr<DarerModel> model;
  TrainResult result;
};

TrainedRun train_run(const RunConfig& rc, const PreparedData& data, std::ostream* history) {
  TrainedRun run;
  run.model = build_model(rc, data);
  TrainConfig tc = rc.train;
  tc.metrics = rc.metric_config(data.corpus.sentiment_labels);
  if (history) {
    json config = rc.to_kv();
    for (const auto& [k, v] : model_config_kv(run.model->config())) config[k] = v;
    *history << json{{"type", "header"},
                     {"config", config},
                     {"parameters", run.model->parameter_count()},
                     {"train_dialogs", data.train.size()},
                     {"dev_dialogs", data.dev.size()}}
                    .dump()
             << "\n";
  }
  run.result = train(*run.model, data.train, data.dev, tc, [&](const EpochRecord& r) {
    log_epoch(r);
    if (history) {
      for (const auto& line : epoch_records(r, data.corpus.sentiment_labels, data.corpus.act_labels))
        *history << line.dump() << "\n";
      history->flush();
    }
  });
  return run;
}

int cmd_train(const CommonOptions& o, std::optional<std::size_t> epochs, bool force) {
  RunConfig rc = run_config(o);
  if (epochs) rc.train.epochs = *epochs;
  const fs::path dir = out_dir(o);
  const fs::path ckpt_path = dir / "checkpoint.bin";
  if (fs::exists(ckpt_path) && !force)
    throw std::runtime_error(ckpt_path.string() + " exists; pass --force to overwrite");

  PreparedData data = load_data(rc.data_dir);
  std::ofstream history(dir / "history.jsonl", std::ios::binary);
  TrainedRun run = train_run(rc, data, &history);

  const MetricConfig mc = rc.metric_config(data.corpus.sentiment_labels);
  const auto& labels_s = data.corpus.sentiment_labels;
  const auto& labels_a = data.corpus.act_labels;
  json metrics = {{"best_epoch", run.result.best_epoch},
                  {"epochs_run", run.result.history.size()},
                  {"dev", metrics_json(run.result.best_dev, labels_s, labels_a)}};
  if (!data.test.empty()) metrics["test"] = metrics_json(evaluate(*run.model, data.test, mc), labels_s, labels_a);
  write_json(dir / "metrics.json", metrics);

  Checkpoint ckpt = make_checkpoint(*run.model, data.vocab, labels_s, labels_a);
  for (const auto& [k, v] : rc.to_kv()) ckpt.meta["run." + k] = v;
  ckpt.meta["best_epoch"] = std::to_string(run.result.best_epoch);
  save_checkpoint(ckpt, ckpt_path);
  std::cerr << "best epoch " << run.result.best_epoch << "; wrote " << dir.string() << "\n";
  return 0;
}

// Compares the model keys explicitly named by --config/--set against the
// checkpoint, naming the first key that differs.
void check_config_matches(const CommonOptions& o, const ModelConfig& trained) {
  std::map<std::string, std::string> kv;
  if (!o.config.empty()) kv = read_kv_file(o.config);
  for (const auto& s : o.overrides) {
    auto [k, v] = parse_assignment(s);
    kv[k] = v;
  }
  const auto reference = model_config_kv(trained);
  for (const auto& [k, v] : kv) {
    ModelConfig probe = trained;
    if (!set_model_key(probe, k, v)) continue;
    const auto got = model_config_kv(probe);
    if (got.at(k) != reference.at(k))
      throw ConfigError("checkpoint/config mismatch on key '" + k + "': checkpoint has " +
                        reference.at(k) + ", config has " + got.at(k));
  }
}

struct LoadedCheckpoint {
  Checkpoint ckpt;
  std::unique_ptr<DarerModel> model;
};

LoadedCheckpoint open_checkpoint(const std::string& path) {
  LoadedCheckpoint lc;
  lc.ckpt = load_checkpoint(path);
  lc.model = model_from_checkpoint(lc.ckpt);
  return lc;
}

std::vector<EncodedDialog> encode_with(const LoadedCheckpoint& lc, const std::vector<Dialog>& dialogs,
                                       const Corpus& corpus) {
  if (corpus.sentiment_labels != lc.ckpt.sentiment_labels || corpus.act_labels != lc.ckpt.act_labels)
    throw ConfigError("corpus label sets differ from the checkpoint's");
  return encode_split(dialogs, Vocabulary::from_tokens(lc.ckpt.vocabulary), corpus);
}

std::string data_dir_for(const CommonOptions& o, const LoadedCheckpoint& lc) {
  if (!o.data.empty()) return o.data;
  auto it = lc.ckpt.meta.find("run.data_dir");
  return it == lc.ckpt.meta.end() ? "" : it->second;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& split,
             const std::string& ignore_label, bool per_step) {
  LoadedCheckpoint lc = open_checkpoint(checkpoint);
  check_config_matches(o, lc.model->config());
  const Corpus corpus = load_corpus(data_dir_for(o, lc));
  const std::vector<EncodedDialog> dialogs = encode_with(lc, corpus.split(split), corpus);
  if (dialogs.empty()) throw std::runtime_error("split '" + split + "' is empty");

  RunConfig rc;
  if (auto it = lc.ckpt.meta.find("run.sentiment_f1"); it != lc.ckpt.meta.end()) rc.sentiment_f1 = it->second;
  if (auto it = lc.ckpt.meta.find("run.act_f1"); it != lc.ckpt.meta.end()) rc.act_f1 = it->second;
  rc.ignore_sentiment_label = ignore_label;
  const MetricConfig mc = rc.metric_config(corpus.sentiment_labels);

  const auto& ls = corpus.sentiment_labels;
  const auto& la = corpus.act_labels;
  json report = {{"split", split}, {"dialogs", dialogs.size()}, {"ignore_label", ignore_label}};
  if (per_step) {
    std::vector<Metrics> steps = evaluate_per_step(*lc.model, dialogs, mc);
    json rows = json::array();
    for (std::size_t t = 0; t < steps.size(); ++t) {
      json row = metrics_json(steps[t], ls, la);
      row["step"] = t;
      rows.push_back(std::move(row));
    }
    report["final"] = rows.back();
    report["final"].erase("step");
    report["per_step"] = std::move(rows);
  } else {
    report["final"] = metrics_json(evaluate(*lc.model, dialogs, mc), ls, la);
  }
  const fs::path path = out_dir(o) / ("eval_" + split + ".json");
  write_json(path, report);
  std::cerr << "f1_s " << fmt(report["final"]["f1_s"].get<double>()) << "  f1_a "
            << fmt(report["final"]["f1_a"].get<double>()) << "; wrote " << path.string() << "\n";
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::vector<int>& t_values, std::optional<std::size_t> epochs) {
  if (t_values.empty()) throw ConfigError("--t-values must list at least one step count");
  RunConfig base = run_config(o);
  if (epochs) base.train.epochs = *epochs;
  PreparedData data = load_data(base.data_dir);
  const fs::path dir = out_dir(o);

  std::ostringstream table;
  table << "T\tdev_f1_s\tdev_f1_a\ttest_f1_s\ttest_f1_a\n";
  for (int t : t_values) {
    RunConfig rc = base;
    rc.model.steps = t;
    std::cerr << "== T=" << t << "\n";
    TrainedRun run = train_run(rc, data, nullptr);
    const MetricConfig mc = rc.metric_config(data.corpus.sentiment_labels);
    table << t << "\t" << fmt(run.result.best_dev.f1_s) << "\t" << fmt(run.result.best_dev.f1_a);
    if (data.test.empty()) {
      table << "\tnan\tnan\n";
    } else {
      Metrics m = evaluate(*run.model, data.test, mc);
      table << "\t" << fmt(m.f1_s) << "\t" << fmt(m.f1_a) << "\n";
    }
  }
  write_text(dir / "sweep_t.tsv", table.str());
  std::cerr << "wrote " << (dir / "sweep_t.tsv").string() << "\n";
  return 0;
}

int cmd_inspect(const CommonOptions& o, const std::string& checkpoint, const std::string& dialog_id,
                std::optional<int> step) {
  LoadedCheckpoint lc = open_checkpoint(checkpoint);
  const Corpus corpus = load_corpus(data_dir_for(o, lc));
  const Dialog* found = nullptr;
  for (const char* split : {"dev", "test", "train"})
    for (const auto& d : corpus.split(split))
      if (!found && d.id == dialog_id) found = &d;
  if (!found) throw std::runtime_error("dialog '" + dialog_id + "' not found");
  const int t = step.value_or(lc.model->config().steps);
  const std::vector<EncodedDialog> enc = encode_with(lc, {*found}, corpus);
  json dump = attention_dump(*lc.model, enc.front(), t, corpus.sentiment_labels, corpus.act_labels);
  const fs::path path = out_dir(o) / ("attention_" + dialog_id + "_step" + std::to_string(t) + ".json");
  write_json(path, dump);
  std::cerr << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_gradcheck(const CommonOptions& o, std::size_t seeds, double tol) {
  GradCheckSuiteResult r = run_gradcheck_suite(seeds, 1e-5, tol);
  std::ostringstream table;
  table << "layer\tseed\tnodes\tmax_rel_error\tpassed\n";
  for (const auto& c : r.cases) {
    std::ostringstream err;
    err.precision(3);
    err << std::scientific << c.worst;
    table << c.layer << "\t" << c.seed << "\t" << c.nodes << "\t" << err.str() << "\t"
          << (c.passed ? "yes" : "no") << "\n";
  }
  const fs::path path = out_dir(o) / "gradcheck.tsv";
  write_text(path, table.str());
  std::cerr << r.cases.size() << " cases, worst relative error " << r.worst << ", "
            << (r.passed() ? "PASS" : "FAIL") << "; wrote " << path.string() << "\n";
  return r.passed() ? 0 : 1;
}

int cmd_gen_synth(const CommonOptions& o, const SplitSizes& sizes, RuleSet rules) {
  const std::uint64_t seed = o.seed.value_or(7);
  const fs::path dir = out_dir(o);
  save_corpus(generate_synthetic(rules, sizes, seed), dir);
  std::cerr << "wrote synthetic corpus (seed " << seed << ") to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint dialog sentiment classification and act recognition"};
  app.require_subcommand(1);

  CommonOptions common;
  std::optional<std::size_t> epochs;
  bool force = false;
  std::string checkpoint, split = "dev", ignore_label, dialog_id;
  bool per_step = false;
  std::vector<int> t_values;
  std::optional<int> step;
  std::size_t seeds = 20;
  double tol = 1e-4;
  SplitSizes sizes;
  RuleSet rules;
  bool no_r1 = false, no_r2 = false, no_r3 = false;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, history and metrics");
  add_common(train_cmd, common);
  train_cmd->add_option("--epochs", epochs, "Override the epoch count");
  train_cmd->add_flag("--force", force, "Overwrite an existing checkpoint");

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a corpus split");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--split", split, "train, dev or test");
  eval_cmd->add_option("--ignore-label", ignore_label, "Sentiment label left out of the averages");
  eval_cmd->add_flag("--per-step", per_step, "Report every reasoning step t = 0..T");

  auto* sweep_cmd = app.add_subcommand("sweep-t", "Train one model per step count");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--t-values", t_values, "Comma-separated step counts")->delimiter(',')->required();
  sweep_cmd->add_option("--epochs", epochs, "Override the epoch count");

  auto* inspect_cmd = app.add_subcommand("inspect", "Dump dual-task attention maps for one dialog");
  add_common(inspect_cmd, common);
  inspect_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  inspect_cmd->add_option("--dialog", dialog_id, "Dialog id")->required();
  inspect_cmd->add_option("--step", step, "Reasoning step (default: T)");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
  add_common(grad_cmd, common);
  grad_cmd->add_option("--seeds", seeds, "Seeds per layer");
  grad_cmd->add_option("--tol", tol, "Maximum relative error");

  auto* synth_cmd = app.add_subcommand("gen-synth", "Write a synthetic corpus with planted rules");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--train", sizes.train, "Training dialogs");
  synth_cmd->add_option("--dev", sizes.dev, "Dev dialogs");
  synth_cmd->add_option("--test", sizes.test, "Test dialogs");
  synth_cmd->add_option("--decoy-rate", rules.decoy_rate, "Misleading keyword rate");
  synth_cmd->add_option("--implicit-reply-rate", rules.implicit_reply_rate,
                        "Rate of replies whose act is not marked in the text");
  synth_cmd->add_flag("--no-disagreement-flip", no_r1, "Drop the disagreement rule");
  synth_cmd->add_flag("--no-agreement-copy", no_r2, "Drop the agreement rule");
  synth_cmd->add_flag("--no-question-answer", no_r3, "Drop the question/answer rule");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(common, epochs, force);
    if (*eval_cmd) return cmd_eval(common, checkpoint, split, ignore_label, per_step);
    if (*sweep_cmd) return cmd_sweep(common, t_values, epochs);
    if (*inspect_cmd) return cmd_inspect(common, checkpoint, dialog_id, step);
    if (*grad_cmd) return cmd_gradcheck(common, seeds, tol);
    if (*synth_cmd) {
      rules.disagreement_flips = !no_r1;
      rules.agreement_copies = !no_r2;
      rules.question_answer = !no_r3;
      return cmd_gen_synth(common, sizes, rules);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

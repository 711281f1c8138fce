// Command-line front end: prep, train, eval, predict, gradcheck.
//
// Exit codes: 0 success, 1 usage, 2 data/format, 3 numerical failure.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "cmsq.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Config keys that shape the prepared data; training takes them from the
// dataset so the checkpoint preprocesses new posts the same way.
const std::vector<std::string> kDataKeys = {"max_len", "vocab_size", "train_fraction", "work_first_hour",
                                            "work_last_hour"};

struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App& cmd, ConfigOptions& opts) {
  cmd.add_option("--config", opts.config_path, "key=value config file")->envname("CMSQ_CONFIG");
  const cmsq::TrainConfig defaults;
  for (const auto& field : cmsq::config_fields()) {
    std::string flag = "--" + field.key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    opts.options[field.key] =
        cmd.add_option(flag, opts.overrides[field.key], field.help)->default_str(field.get(defaults));
  }
}

// defaults < config file < flags
cmsq::TrainConfig resolve_config(const ConfigOptions& opts) {
  cmsq::TrainConfig cfg;
  if (!opts.config_path.empty()) cmsq::apply_config_file(cfg, opts.config_path);
  for (const auto& [key, option] : opts.options) {
    if (option->count() > 0) cmsq::set_config_value(cfg, key, opts.overrides.at(key));
  }
  cfg.validate();
  return cfg;
}

void print_pairs(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& pairs) {
  for (const auto& [k, v] : pairs) out << k << "=" << v << "\n";
}

int cmd_prep(const std::string& input, const std::string& out_dir, const ConfigOptions& opts) {
  const cmsq::TrainConfig cfg = resolve_config(opts);
  const cmsq::LoadResult loaded = cmsq::load_posts(input);
  for (const auto& m : loaded.malformed) {
    std::cerr << input << ":" << m.line << ": malformed row: " << m.reason << "\n";
  }
  const cmsq::Dataset ds = cmsq::prepare_dataset(loaded, cfg);
  cmsq::write_dataset(ds, out_dir);
  print_pairs(std::cout, ds.manifest);
  return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& out_path, std::string log_path,
              std::size_t threads, const ConfigOptions& opts) {
  cmsq::TrainConfig cfg = resolve_config(opts);
  const cmsq::Dataset ds = cmsq::read_dataset(data_dir);
  for (const auto& key : kDataKeys) {
    const auto* field = cmsq::find_config_field(key);
    const std::string from_data = field->get(ds.config);
    if (field->get(cfg) != from_data && opts.options.at(key)->count() > 0) {
      std::cerr << "note: " << key << " taken from the dataset (" << from_data << ")\n";
    }
    field->set(cfg, from_data);
  }
  if (log_path.empty()) log_path = out_path + ".log";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw cmsq::DataError("cannot write log file " + log_path);

  std::cout << "train_examples=" << ds.train.size() << "\nvalidation_examples=" << ds.validation.size()
            << "\n";
  cmsq::TrainHooks hooks;
  hooks.threads = threads;
  hooks.on_epoch = [&](const cmsq::EpochLog& e) {
    const std::string line = cmsq::format_epoch_log(e);
    std::cout << line << std::endl;
    log << line << std::endl;
  };
  const cmsq::TrainResult result =
      cmsq::train(ds.train, ds.validation, cfg, ds.vocab.size(), ds.labels.size(), hooks);

  const cmsq::Checkpoint ck{result.best, ds.vocab, ds.scaler, ds.labels, cfg};
  cmsq::save_checkpoint(ck, out_path);
  const std::string summary = "best_epoch=" + std::to_string(result.best_epoch) +
                              "\nbest_val_weighted_f1=" + cmsq::format_double(result.best_f1) +
                              "\nparameters=" + std::to_string(result.best.parameter_count()) +
                              "\ncheckpoint=" + out_path + "\n";
  std::cout << summary;
  log << summary;
  return kExitOk;
}

int cmd_eval(const std::string& ck_path, const std::string& data_dir, const std::string& split,
             const std::string& out_path) {
  const cmsq::Checkpoint ck = cmsq::load_checkpoint(ck_path);
  const cmsq::Dataset ds = cmsq::read_dataset(data_dir);
  if (ck.vocab.size() != ds.vocab.size()) {
    throw cmsq::DataError("checkpoint vocabulary has " + std::to_string(ck.vocab.size()) +
                          " tokens but dataset vocabulary has " + std::to_string(ds.vocab.size()));
  }
  if (!(ck.vocab == ds.vocab)) throw cmsq::DataError("checkpoint and dataset vocabularies differ");
  if (!(ck.labels == ds.labels)) throw cmsq::DataError("checkpoint and dataset label maps differ");
  if (ck.config.max_len != ds.config.max_len) throw cmsq::DataError("checkpoint and dataset max_len differ");

  const auto& examples = split == "train" ? ds.train : ds.validation;
  if (examples.empty()) throw cmsq::DataError("split '" + split + "' is empty");
  const cmsq::Evaluation ev = cmsq::evaluate_examples(ck.params, examples);
  const cmsq::EvalReport report = cmsq::evaluate(ev.confusion);
  const std::string text = "split=" + split + "\nloss=" + cmsq::format_double(ev.mean_loss) + "\n" +
                           cmsq::format_report(report, ev.confusion, ck.labels.names());
  std::cout << text;
  if (!out_path.empty()) cmsq::write_file_atomic(out_path, text);
  return kExitOk;
}

int cmd_predict(const std::string& ck_path, const std::string& title, const std::string& selftext,
                std::int64_t created_utc) {
  const cmsq::Checkpoint ck = cmsq::load_checkpoint(ck_path);
  const cmsq::Prediction p = cmsq::predict(ck, title, selftext, created_utc);
  std::cout << "class=" << p.label << "\n";
  for (std::size_t c = 0; c < p.probs.size(); ++c) {
    std::cout << "prob." << ck.labels.name(c) << "=" << cmsq::format_double(p.probs[c]) << "\n";
  }
  std::cout << "alpha_text=" << cmsq::format_double(p.alpha_text) << "\n"
            << "alpha_time=" << cmsq::format_double(p.alpha_time) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const cmsq::GradCheckConfig& cfg, double threshold) {
  const cmsq::GradCheckReport report = cmsq::grad_check(cfg);
  for (const auto& t : report.tensors) {
    std::printf("tensor=%s checked=%zu max_rel_error=%.3e analytic=%.6e numeric=%.6e\n", t.name.c_str(),
                t.checked, t.max_rel_error, t.analytic, t.numeric);
  }
  const bool ok = report.passed(threshold);
  std::printf("max_rel_error=%.3e\nthreshold=%.1e\nstatus=%s\n", report.max_rel_error(), threshold,
              ok ? "pass" : "fail");
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal text + posting-time classifier: BiLSTM and LSTM branches fused by a modality gate"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string input, out, data, checkpoint, log_path, split = "validation", title, selftext, report_out;
  std::int64_t created_utc = 0;
  std::size_t threads = 1;

  auto* prep = app.add_subcommand("prep", "Clean, filter, encode and split a raw posts CSV");
  prep->add_option("--input", input, "CSV with title, selftext, created_utc, over_18, subreddit")->required();
  prep->add_option("--out", out, "output dataset directory")->required();
  ConfigOptions prep_cfg;
  add_config_options(*prep, prep_cfg);

  auto* train = app.add_subcommand("train", "Train on a prepared dataset and save the best checkpoint");
  train->add_option("--data", data, "dataset directory written by prep")->required();
  train->add_option("--out", out, "checkpoint path")->required();
  train->add_option("--log", log_path, "epoch log file (default: <out>.log)");
  train->add_option("--threads", threads, "worker threads per batch; results do not depend on it")
      ->default_val(1)
      ->check(CLI::PositiveNumber);
  ConfigOptions train_cfg;
  add_config_options(*train, train_cfg);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a prepared dataset split");
  eval->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  eval->add_option("--data", data, "dataset directory written by prep")->required();
  eval->add_option("--split", split, "train or validation")->check(CLI::IsMember({"train", "validation"}));
  eval->add_option("--report", report_out, "also write the report to this file");

  auto* pred = app.add_subcommand("predict", "Classify one post");
  pred->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  pred->add_option("--title", title, "post title");
  pred->add_option("--selftext", selftext, "post body");
  pred->add_option("--created-utc", created_utc, "creation time, epoch seconds (UTC)")->required();

  cmsq::GradCheckConfig gc;
  double threshold = 1e-4;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  grad->add_option("--vocab", gc.dims.vocab, "embedding rows");
  grad->add_option("--embed", gc.dims.embed, "embedding width");
  grad->add_option("--text-hidden", gc.dims.text_hidden, "BiLSTM hidden units per direction");
  grad->add_option("--time-hidden", gc.dims.time_hidden, "temporal LSTM hidden units");
  grad->add_option("--fuse", gc.dims.fuse, "projected modality width");
  grad->add_option("--att", gc.dims.att, "attention scoring width");
  grad->add_option("--classes", gc.dims.classes, "output classes");
  grad->add_option("--seq-len", gc.seq_len, "token sequence length");
  grad->add_option("--batch", gc.batch, "examples in the checked loss");
  grad->add_option("--dropout", gc.dropout, "dropout rate (masks fixed per example)");
  grad->add_option("--eps", gc.eps, "finite-difference step")->check(CLI::Range(1e-7, 1e-3));
  grad->add_option("--max-per-tensor", gc.max_per_tensor, "subsample size for larger tensors");
  grad->add_option("--seed", gc.seed, "random seed");
  grad->add_option("--threshold", threshold, "fail when any relative error reaches this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    for (const auto* sub : app.get_subcommands()) std::cerr << "\n" << sub->help();
    return kExitUsage;
  }

  try {
    if (*prep) return cmd_prep(input, out, prep_cfg);
    if (*train) return cmd_train(data, out, log_path, threads, train_cfg);
    if (*eval) return cmd_eval(checkpoint, data, split, report_out);
    if (*pred) return cmd_predict(checkpoint, title, selftext, created_utc);
    if (*grad) return cmd_gradcheck(gc, threshold);
  } catch (const cmsq::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cmsq::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const cmsq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

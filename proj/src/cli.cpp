#include "neurofuzzy/cli.hpp"

#include "neurofuzzy/diagnostics.hpp"
#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/training.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

namespace nf {

namespace fs = std::filesystem;

namespace {

struct CommonData {
  std::string dataset = "mnist";
  std::string data_root;
  Index batch_size = 512;
};

struct TrainArgs {
  CommonData data;
  std::string spec_path;
  std::string schedule;  // empty: pick from dataset
  int epochs = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  std::string resume;
  Index val_count = 10000;
  Index train_count = 0;  // 0: all remaining
  bool no_augment = false;
};

struct EvalArgs {
  CommonData data;
  std::string checkpoint;
  std::string out_dir;
  std::string split = "test";
  bool last = false;
};

struct Splits {
  LabeledDataset train, val, test;
};

Splits prepare_data(DatasetKind kind, const std::string& root, Index val_count, Index train_count) {
  DatasetFiles files = load_dataset(kind, root);
  if (kind != DatasetKind::MNIST) {
    files.train = normalize_samplewise(files.train);
    files.test = normalize_samplewise(files.test);
  }
  auto [train, val] = split_train_val(files.train, val_count);
  if (train_count > 0) {
    if (train_count > train.size()) {
      throw ConfigError("--train-count " + std::to_string(train_count) + " exceeds the " +
                        std::to_string(train.size()) + " available training records");
    }
    train = train.slice(0, train_count);
  }
  return {std::move(train), std::move(val), std::move(files.test)};
}

void write_eval_csv(const fs::path& path, const std::string& split, const EvalResult& r) {
  std::ofstream os(path);
  os << "split,loss,error_rate,accuracy\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", r.loss, r.error_rate, r.accuracy());
  os << split << ',' << buf << '\n';
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const DatasetKind kind = parse_dataset_kind(a.data.dataset);
  ScheduleSpec schedule = kind == DatasetKind::MNIST ? ScheduleSpec::mnist() : ScheduleSpec::cifar();
  if (a.schedule == "mnist") schedule = ScheduleSpec::mnist();
  if (a.schedule == "cifar") schedule = ScheduleSpec::cifar();
  const AugmentPolicy policy = a.no_augment ? AugmentPolicy::none()
                               : kind == DatasetKind::MNIST ? AugmentPolicy::mnist()
                                                            : AugmentPolicy::cifar();

  Splits data = prepare_data(kind, a.data.data_root, a.val_count, a.train_count);
  const InputShape input{data.train.channels(), data.train.height(), data.train.width()};
  const long batches = batches_per_epoch(data.train.size(), a.data.batch_size);

  TrainState state;
  if (!a.resume.empty()) {
    state = checkpoint_load(a.resume);
    if (!a.spec_path.empty() && load_network_spec(a.spec_path).layers != state.network.spec().layers) {
      throw ConfigError("--spec differs from the network stored in " + a.resume);
    }
    out << "resuming from " << a.resume << " at epoch " << state.epoch << '\n';
  } else {
    if (a.spec_path.empty()) throw UsageError("train needs --spec (or --resume)");
    state = init_train_state(load_network_spec(a.spec_path), input, data.train.num_classes, schedule, batches,
                             a.seed);
  }
  out << "seed " << state.seed << ", " << data.train.size() << " train / " << data.val.size() << " val / "
      << data.test.size() << " test records, " << batches << " batches per epoch\n";
  out << state.network.describe();

  fs::create_directories(a.out_dir);
  FitOptions options;
  options.epochs = a.epochs;
  options.batch_size = a.data.batch_size;
  options.augment = policy;
  options.checkpoint_path = fs::path(a.out_dir) / "checkpoint.nfz";
  options.metrics_path = fs::path(a.out_dir) / "metrics.csv";
  options.on_epoch = [&out](const MetricRow& r) {
    out << "epoch " << r.epoch << "  lr " << std::setprecision(6) << r.lr << "  train_loss " << r.train_loss
        << "  val_loss " << r.val_loss << "  val_error " << r.val_error << "  (" << std::fixed
        << std::setprecision(1) << r.wall_seconds << "s)" << std::defaultfloat << std::endl;
  };
  fit(state, data.train, data.val, options);

  state.restore_best();
  const EvalResult test = evaluate(state.network, data.test, a.data.batch_size);
  out << "test accuracy " << std::setprecision(6) << test.accuracy() << " (loss " << test.loss << ", best epoch "
      << state.best_epoch << ")\n";
  write_eval_csv(fs::path(a.out_dir) / "test_metrics.csv", "test", test);
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  TrainState state = checkpoint_load(a.checkpoint);
  if (!a.last) state.restore_best();
  const DatasetKind kind = parse_dataset_kind(a.data.dataset);
  DatasetFiles files = load_dataset(kind, a.data.data_root);
  LabeledDataset data;
  if (a.split == "test") {
    data = std::move(files.test);
  } else {
    data = std::move(files.train);
  }
  if (kind != DatasetKind::MNIST) data = normalize_samplewise(data);
  const EvalResult r = evaluate(state.network, data, a.data.batch_size);
  out << a.split << " accuracy " << std::setprecision(6) << r.accuracy() << " error " << r.error_rate << " loss "
      << r.loss << " (" << data.size() << " records)\n";
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_eval_csv(fs::path(a.out_dir) / "eval.csv", a.split, r);
  }
  return 0;
}

int cmd_gradcheck(const std::string& spec_path, std::uint64_t seed, Index samples, std::ostream& out) {
  const NetworkSpec spec = load_network_spec(spec_path);
  NetworkGradCheckOptions options;
  options.check.samples_per_param = samples;
  const GradCheckReport report = gradcheck_network(spec, seed, options);
  constexpr double kTolerance = 1e-4;
  out << std::left << std::setw(28) << "parameter" << std::setw(10) << "coords" << std::setw(16) << "max_rel_err"
      << "max_abs_err\n";
  for (const auto& p : report.params) {
    out << std::setw(28) << p.name << std::setw(10) << p.coords_checked << std::setw(16) << std::setprecision(3)
        << std::scientific << p.max_rel_error << p.max_abs_error << std::defaultfloat << '\n';
  }
  const bool ok = report.max_rel_error() < kTolerance;
  out << "max relative error " << std::scientific << std::setprecision(3) << report.max_rel_error()
      << std::defaultfloat << (ok ? "  OK" : "  FAIL (>= 1e-4)") << '\n';
  return ok ? 0 : 1;
}

int cmd_oracle(int trials, std::uint64_t seed, std::ostream& out) {
  const OracleReport r = run_oracle_trials(trials, seed);
  constexpr double kTolerance = 1e-6;
  out << "fio: " << r.fio_trials << " trials, max |fused - reference| = " << std::scientific << std::setprecision(3)
      << r.fio_max_abs_diff << '\n'
      << "fpo: " << r.fpo_trials << " trials, max |fused - reference| = " << r.fpo_max_abs_diff << std::defaultfloat
      << '\n'
      << "elapsed " << std::fixed << std::setprecision(2) << r.seconds << "s" << std::defaultfloat << '\n';
  const bool ok = r.max_abs_diff() < kTolerance;
  out << (ok ? "OK" : "FAIL (>= 1e-6)") << '\n';
  return ok ? 0 : 1;
}

void print_stats(std::ostream& out, const std::string& name, const Shape& shape, const Array& v) {
  const double mean = v.mean();
  const double stddev = std::sqrt((v - mean).square().mean());
  out << std::left << std::setw(26) << name << std::setw(16) << to_string(shape) << std::right << std::scientific
      << std::setprecision(3) << std::setw(12) << mean << std::setw(12) << stddev << std::setw(12) << v.minCoeff()
      << std::setw(12) << v.maxCoeff() << std::defaultfloat << '\n';
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const TrainState s = checkpoint_load(path);
  out << "checkpoint " << path << '\n'
      << "epoch " << s.epoch << ", batches " << s.batch_count << ", adam steps " << s.adam.step << ", lr "
      << s.scheduler.lr() << '\n';
  if (s.best_epoch > 0) out << "best validation error " << s.best_val_error << " at epoch " << s.best_epoch << '\n';
  out << s.network.describe() << '\n';
  out << std::left << std::setw(26) << "parameter" << std::setw(16) << "shape" << std::right << std::setw(12)
      << "mean" << std::setw(12) << "std" << std::setw(12) << "min" << std::setw(12) << "max" << '\n';
  for (const auto& p : s.network.parameters()) print_stats(out, p.name, p.tensor.shape(), p.tensor.value());

  std::size_t layer = 0;
  for (const auto& f : s.network.fuzzy_layers()) {
    out << "\nrule filters of fuzzy layer " << layer++ << " (" << to_string(f.kind) << ", " << f.rules
        << " rules of " << f.channels << "x" << f.kernel << "x" << f.kernel << ")\n";
    const Index size = f.channels * f.kernel * f.kernel;
    Array norms(f.rules);
    for (Index k = 0; k < f.rules; ++k) norms(k) = f.rule_filters.value().segment(k * size, size).matrix().norm();
    out << "  L2 norm: mean " << norms.mean() << ", min " << norms.minCoeff() << ", max " << norms.maxCoeff() << '\n';
    const Index shown = std::min<Index>(f.rules, 8);
    for (Index k = 0; k < shown; ++k) {
      const auto w = f.rule_filters.value().segment(k * size, size);
      out << "  rule " << k << ": norm " << norms(k) << ", sum " << w.sum() << ", min " << w.minCoeff() << ", max "
          << w.maxCoeff() << '\n';
    }
    if (shown < f.rules) out << "  ... " << f.rules - shown << " more\n";
  }
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep neuro-fuzzy networks: training, evaluation and layer diagnostics", "nfz"};
  app.require_subcommand(1);

  auto add_data = [](CLI::App* cmd, CommonData& d, bool root_required) {
    cmd->add_option("--dataset", d.dataset, "mnist, cifar10 or cifar100")
        ->check(CLI::IsMember({"mnist", "cifar10", "cifar100"}));
    auto* root = cmd->add_option("--data-root", d.data_root, "Directory with the dataset files");
    if (root_required) root->required();
    cmd->add_option("--batch-size", d.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  };

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a network and write metrics and checkpoints");
  add_data(train, ta.data, true);
  train->add_option("--spec", ta.spec_path, "Network description file");
  train->add_option("--epochs", ta.epochs, "Total epochs to reach")->check(CLI::NonNegativeNumber);
  train->add_option("--seed", ta.seed, "Random seed");
  train->add_option("--out", ta.out_dir, "Output directory");
  train->add_option("--resume", ta.resume, "Continue from a checkpoint");
  train->add_option("--schedule", ta.schedule, "Learning-rate schedule (default: by dataset)")
      ->check(CLI::IsMember({"mnist", "cifar"}));
  train->add_option("--val-count", ta.val_count, "Trailing training records used for validation")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--train-count", ta.train_count, "Use only the first N training records")
      ->check(CLI::NonNegativeNumber);
  train->add_flag("--no-augment", ta.no_augment, "Disable data augmentation");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_data(eval, ea.data, true);
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
  eval->add_option("--out", ea.out_dir, "Directory for eval.csv");
  eval->add_option("--split", ea.split, "test or train")->check(CLI::IsMember({"test", "train"}));
  eval->add_flag("--last", ea.last, "Use the final parameters instead of the best snapshot");

  std::string gc_spec;
  std::uint64_t gc_seed = 7;
  Index gc_samples = 50;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  gradcheck->add_option("--spec", gc_spec, "Network description with an input line")->required();
  gradcheck->add_option("--seed", gc_seed, "Random seed");
  gradcheck->add_option("--samples", gc_samples, "Coordinates per parameter")->check(CLI::PositiveNumber);

  int oc_trials = 100;
  std::uint64_t oc_seed = 7;
  auto* oracle = app.add_subcommand("oracle-check", "Compare fused fuzzy layers with the loop reference");
  oracle->add_option("--trials", oc_trials, "Random instances per layer kind")->check(CLI::PositiveNumber);
  oracle->add_option("--seed", oc_seed, "Random seed");

  std::string ins_path;
  auto* inspect = app.add_subcommand("inspect", "Print parameter statistics of a checkpoint");
  inspect->add_option("--checkpoint", ins_path, "Checkpoint file")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(ta, out);
    if (*eval) return cmd_eval(ea, out);
    if (*gradcheck) return cmd_gradcheck(gc_spec, gc_seed, gc_samples, out);
    if (*oracle) return cmd_oracle(oc_trials, oc_seed, out);
    if (*inspect) return cmd_inspect(ins_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace nf

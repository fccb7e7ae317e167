// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--mnist-dir DIR] [--epochs N] [--only N]...

#include "neurofuzzy/diagnostics.hpp"
#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/fuzzy_layers.hpp"
#include "neurofuzzy/training.hpp"
#include "fake_data.hpp"
#include "test_util.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <iostream>
#include <set>
#include <sstream>

using namespace nf;
using namespace nf::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = NEUROFUZZY_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  std::string mnist_dir = NEUROFUZZY_MNIST_DIR;
  std::string properties_binary = NEUROFUZZY_PROPERTIES_BINARY;
  int epochs = 15;
  int repro_epochs = 2;
  std::uint64_t seed = 1;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool same_history(const std::vector<MetricRow>& a, const std::vector<MetricRow>& b, std::size_t n) {
  if (a.size() < n || b.size() < n) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (!a[i].same_numbers(b[i])) return false;
  return true;
}

Outcome oracle_equivalence(const Settings&) {
  OracleTrialLimits limits;
  limits.max_rules = 4;
  limits.max_outputs = 4;
  const OracleReport r = run_oracle_trials(100, 7, limits);
  const bool ok = r.fio_trials == 100 && r.fpo_trials == 100 && r.max_abs_diff() < 1e-6 && r.seconds < 60.0;
  return {ok, "max |fused - reference| " + fmt("%.3g", r.max_abs_diff()) + " over 100 FIO + 100 FPO instances in " +
                  fmt("%.2f", r.seconds) + "s"};
}

Outcome gradient_correctness(const Settings&) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool complete = true;
  for (const char* name : {"tiny_fio.net", "tiny_fpo.net"}) {
    const NetworkSpec spec = load_network_spec(kConfigs / name);
    Network probe = Network::build(spec, *spec.input, *spec.num_classes, 0);
    std::map<std::string, Index> sizes;
    for (const auto& p : probe.parameters()) sizes[p.name] = p.tensor.numel();

    NetworkGradCheckOptions opts;
    opts.check.perturbation = 1e-5;
    opts.check.samples_per_param = 50;
    const GradCheckReport report = gradcheck_network(spec, 7, opts);
    worst = std::max(worst, report.max_rel_error());
    for (const auto& e : report.params) {
      // Groups smaller than 50 are checked in full.
      const Index expected = std::min<Index>(50, sizes[e.name]);
      if (e.coords_checked < expected) complete = false;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && complete && secs < 120.0,
          "max relative error " + fmt("%.3g", worst) + " on fio+fl and fpo+fl nets, h=1e-5, >= min(50, size) coords per group in " +
              fmt("%.2f", secs) + "s"};
}

Outcome invariant_suite(const Settings& s) {
  const std::string cmd = "\"" + s.properties_binary + "\" --gtest_brief=1 > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return {rc == 0, "randomized property suite (" + fs::path(s.properties_binary).filename().string() +
                       ", about 1850 cases) exit status " + std::to_string(rc)};
}

Outcome four_by_four(const Settings&) {
  std::mt19937_64 rng(1);
  const FuzzyLayerParams p = init_params(LayerKind::FIO, 1, 1, 1, 2, 1, rng);
  const Tensor image = random_tensor({1, 1, 4, 4}, rng, 0, 1);
  const FuzzyTrace t = fuzzy_forward_traced(image, p);
  const bool ok = t.membership.shape() == Shape{1, 1, 3, 3} && t.padded.shape() == Shape{1, 1, 5, 5} &&
                  t.output.shape() == Shape{1, 1, 4, 4};
  return {ok, "membership " + to_string(t.membership.shape()) + ", padded firing " + to_string(t.padded.shape()) +
                  ", output " + to_string(t.output.shape())};
}

Outcome schedule_correctness(const Settings&) {
  double worst = 0.0;
  bool milestones = true;
  for (const ScheduleSpec& spec : {ScheduleSpec::mnist(), ScheduleSpec::cifar()}) {
    const long batches = 50;
    LrScheduler sch(spec, batches);
    for (int epoch = 0; epoch <= 400; ++epoch) {
      for (long b = 0; b < batches; ++b) {
        const double closed = current_lr(spec, epoch, b, batches, sch.plateau_epochs());
        worst = std::max(worst, std::abs(sch.lr() - closed) / closed);
        sch.step_batch();
      }
      const double before = sch.lr();
      sch.end_epoch(epoch < 30 ? 0.5 - 0.01 * epoch : 0.2);
      if (spec.mode == ScheduleMode::Milestones && (sch.epoch() == 100 || sch.epoch() == 300)) {
        milestones = milestones && std::abs(sch.lr() / before / (0.1 * spec.per_epoch_decay) - 1.0) < 1e-12;
      }
    }
  }
  return {worst < 1e-12 && milestones,
          "max relative gap iterative vs closed form " + fmt("%.3g", worst) +
              " over epochs 0-400 in milestone and plateau modes; /10 at epochs 100 and 300"};
}

Outcome cifar_smoke() {
  TempDir dir("accept_cifar");
  std::ostringstream detail;
  bool ok = true;
  for (const auto& [kind, file] : {std::pair{DatasetKind::CIFAR10, "cifar10.net"}, std::pair{DatasetKind::CIFAR100, "cifar100.net"}}) {
    const fs::path root = dir / file;
    write_fake_cifar(root, kind, 16, 8, 3);
    try {
      DatasetFiles files = load_dataset(kind, root);
      auto [train, val] = split_train_val(normalize_samplewise(files.train), 16);
      const NetworkSpec spec = load_network_spec(kConfigs / file);
      TrainState state = init_train_state(spec, {3, 32, 32}, train.num_classes, ScheduleSpec::cifar(),
                                          batches_per_epoch(train.size(), 32), 1);
      FitOptions o;
      o.epochs = 1;
      o.batch_size = 32;
      o.augment = AugmentPolicy::cifar();
      fit(state, train, val, o);
      detail << file << " 1 epoch ok; ";
      ok = ok && state.history.size() == 1 && std::isfinite(state.history[0].train_loss);
    } catch (const std::exception& e) {
      detail << file << ": " << e.what() << "; ";
      ok = false;
    }
  }
  return {ok, detail.str()};
}

Outcome desk_training(const Settings& s) {
  const Outcome cifar = cifar_smoke();
  if (!fs::exists(fs::path(s.mnist_dir) / "train-images-idx3-ubyte")) {
    return {false, "MNIST files not found under " + s.mnist_dir + "; CIFAR smoke: " + cifar.detail};
  }
  const DatasetFiles files = load_dataset(DatasetKind::MNIST, s.mnist_dir);
  auto [rest, val] = split_train_val(files.train, 1000);
  const LabeledDataset train = rest.slice(0, 10000);
  const NetworkSpec spec = load_network_spec(kConfigs / "mnist.net");
  const Index batch = 128;
  auto fresh = [&] {
    return init_train_state(spec, {1, 28, 28}, 10, ScheduleSpec::mnist(), batches_per_epoch(train.size(), batch),
                            s.seed);
  };
  FitOptions o;
  o.batch_size = batch;
  o.augment = AugmentPolicy::mnist();
  o.on_epoch = [](const MetricRow& r) {
    std::cout << "  epoch " << r.epoch << "  train_loss " << r.train_loss << "  val_error " << r.val_error << "  ("
              << fmt("%.1f", r.wall_seconds) << "s)" << std::endl;
  };

  const auto t0 = std::chrono::steady_clock::now();
  TrainState state = fresh();
  o.epochs = s.epochs;
  fit(state, train, val, o);
  state.restore_best();
  const EvalResult test = evaluate(state.network, files.test);
  const double minutes = seconds_since(t0) / 60.0;

  TrainState again = fresh();
  o.epochs = s.repro_epochs;
  fit(again, train, val, o);
  const bool reproducible = same_history(state.history, again.history, static_cast<std::size_t>(s.repro_epochs));

  const bool ok = test.accuracy() >= 0.95 && minutes <= 30.0 && s.epochs <= 40 && reproducible && cifar.pass;
  return {ok, "MNIST 10k/1k, batch 128, " + std::to_string(s.epochs) + " epochs, best epoch " +
                  std::to_string(state.best_epoch) + ": test accuracy " + fmt("%.4f", test.accuracy()) + " in " +
                  fmt("%.1f", minutes) + " min; history rerun " + (reproducible ? "bitwise identical" : "DIFFERS") +
                  " over " + std::to_string(s.repro_epochs) + " epochs; CIFAR smoke: " + cifar.detail};
}

Outcome data_plumbing(const Settings& s) {
  std::ostringstream detail;
  bool ok = true;
  TempDir dir("accept_data");

  // MNIST bytes survive load + re-encode.
  auto round_trip = [](const fs::path& images, const fs::path& labels) {
    const LabeledDataset ds = load_mnist(images, labels);
    const Bytes img = read_file(images), lab = read_file(labels);
    if (img.size() != 16 + static_cast<std::size_t>(ds.images.numel()) || lab.size() != 8 + ds.labels.size()) return false;
    for (Index i = 0; i < ds.images.numel(); ++i)
      if (static_cast<unsigned char>(std::lround(ds.images[i] * 255.0)) != img[16 + static_cast<std::size_t>(i)]) return false;
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
      if (ds.labels[i] != lab[8 + i]) return false;
    return true;
  };
  write_fake_mnist(dir / "mnist", 50, 10, 5);
  bool mnist = round_trip(dir / "mnist" / "train-images-idx3-ubyte", dir / "mnist" / "train-labels-idx1-ubyte");
  const fs::path real(s.mnist_dir);
  if (fs::exists(real / "t10k-images-idx3-ubyte")) {
    mnist = mnist && round_trip(real / "t10k-images-idx3-ubyte", real / "t10k-labels-idx1-ubyte");
    detail << "MNIST round trip (synthetic + real t10k) ";
  } else {
    detail << "MNIST round trip (synthetic) ";
  }
  detail << (mnist ? "exact" : "MISMATCH");
  ok = ok && mnist;

  // CIFAR record-size validation.
  std::mt19937_64 rng(6);
  int rejected = 0;
  const std::vector<std::pair<DatasetKind, Bytes>> bad{
      {DatasetKind::CIFAR10, Bytes(3073 * 2 + 100, 0)},
      {DatasetKind::CIFAR10, make_cifar(DatasetKind::CIFAR100, 3, rng)},
      {DatasetKind::CIFAR100, make_cifar(DatasetKind::CIFAR10, 3, rng)},
      {DatasetKind::CIFAR10, Bytes{}},
  };
  for (std::size_t i = 0; i < bad.size(); ++i) {
    const fs::path p = dir / ("bad" + std::to_string(i) + ".bin");
    write_file(p, bad[i].second);
    try {
      load_cifar({p}, bad[i].first);
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  detail << "; CIFAR malformed files rejected " << rejected << "/" << bad.size();
  ok = ok && rejected == static_cast<int>(bad.size());

  // Resume reproduces the uninterrupted run.
  std::mt19937_64 data_rng(7);
  LabeledDataset train;
  train.images = random_tensor({64, 1, 8, 8}, data_rng, 0, 1);
  train.num_classes = 3;
  train.sample_shape = {1, 8, 8};
  for (int i = 0; i < 64; ++i) train.labels.push_back(i % 3);
  const LabeledDataset val = train.slice(48, 64);
  const NetworkSpec spec = parse_network_spec("fio rules=2 outputs=2 kernel=3\nfpo rules=2 outputs=2 kernel=2 stride=2\nfl units=3\n");
  auto fresh = [&] {
    return init_train_state(spec, {1, 8, 8}, 3, ScheduleSpec::mnist(), batches_per_epoch(train.size(), 16), 11);
  };
  FitOptions o;
  o.batch_size = 16;
  o.augment = AugmentPolicy::mnist();
  o.epochs = 4;
  TrainState full = fresh();
  fit(full, train, val, o);
  TrainState part = fresh();
  o.epochs = 2;
  o.checkpoint_path = dir / "ckpt.nfz";
  fit(part, train, val, o);
  TrainState resumed = checkpoint_load(dir / "ckpt.nfz");
  o.epochs = 4;
  fit(resumed, train, val, o);
  const bool resume_ok = full.history.size() == 4 && same_history(full.history, resumed.history, 4);
  detail << "; checkpoint resume history " << (resume_ok ? "bitwise identical" : "DIFFERS");
  return {ok && resume_ok, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  std::vector<int> only;
  CLI::App app{"Acceptance criteria 1-7"};
  app.add_option("--mnist-dir", s.mnist_dir, "Directory with the MNIST IDX files");
  app.add_option("--epochs", s.epochs, "Epochs for the MNIST training criterion")->check(CLI::Range(1, 40));
  app.add_option("--repro-epochs", s.repro_epochs, "Epochs rerun to check bitwise reproducibility")->check(CLI::PositiveNumber);
  app.add_option("--seed", s.seed, "Seed for the MNIST run");
  app.add_option("--properties-binary", s.properties_binary, "Path to the property test executable");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  s.repro_epochs = std::min(s.repro_epochs, s.epochs);

  const std::vector<std::pair<std::string, std::function<Outcome(const Settings&)>>> criteria{
      {"oracle equivalence", oracle_equivalence}, {"gradient correctness", gradient_correctness},
      {"invariant suite", invariant_suite},       {"4x4 worked example", four_by_four},
      {"schedule correctness", schedule_correctness}, {"desk-scale training", desk_training},
      {"data plumbing", data_plumbing},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome r;
    try {
      r = criteria[i].second(s);
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first << "): " << r.detail
              << std::endl;
  }
  return all ? 0 : 1;
}

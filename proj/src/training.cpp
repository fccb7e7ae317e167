#include "neurofuzzy/training.hpp"

#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/ops.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace nf {

bool MetricRow::same_numbers(const MetricRow& o) const {
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  return epoch == o.epoch && batch_count == o.batch_count && same(lr, o.lr) && same(train_loss, o.train_loss) &&
         same(val_loss, o.val_loss) && same(val_error, o.val_error);
}

void write_metrics_header(std::ostream& os) { os << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& os, const MetricRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.3f", r.epoch, r.batch_count, r.lr,
                r.train_loss, r.val_loss, r.val_error, r.wall_seconds);
  os << buf << '\n';
}

void TrainState::restore_best() {
  if (best_params.empty()) return;
  auto params = network.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.value() = best_params[i];
}

long batches_per_epoch(Index dataset_size, Index batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  return static_cast<long>((dataset_size + batch_size - 1) / batch_size);
}

TrainState init_train_state(const NetworkSpec& spec, InputShape input, int num_classes,
                            const ScheduleSpec& schedule, long batches, std::uint64_t seed) {
  TrainState s;
  s.network = Network::build(spec, input, num_classes, seed);
  s.seed = seed;
  const auto params = s.network.parameters();
  s.adam = AdamState::for_params(params);
  s.scheduler = LrScheduler(schedule, std::max(1L, batches));
  // Separate stream from the one used for initialization.
  s.rng.seed(seed ^ 0x9E3779B97F4A7C15ULL);
  return s;
}

EvalResult evaluate(const Network& network, const LabeledDataset& data, Index batch_size) {
  if (data.size() == 0) return {std::nan(""), std::nan("")};
  NoGradGuard no_grad;
  std::mt19937_64 unused;
  BatchSequence batches(data, batch_size, false, unused);
  double loss = 0.0;
  Index wrong = 0;
  for (Index b = 0; b < batches.size(); ++b) {
    const Batch batch = batches[b];
    const Tensor logits = network.forward(batch.images, false, nullptr);
    loss += softmax_cross_entropy(logits, batch.labels).item() * static_cast<double>(batch.labels.size());
    const Index classes = logits.dim(1);
    ConstMatrixMap z(logits.value().data(), logits.dim(0), classes);
    for (Index i = 0; i < z.rows(); ++i) {
      Index best = 0;
      z.row(i).maxCoeff(&best);
      if (best != batch.labels[static_cast<std::size_t>(i)]) ++wrong;
    }
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(wrong) / n};
}

void fit(TrainState& state, const LabeledDataset& train, const LabeledDataset& val, const FitOptions& options) {
  if (train.size() == 0) throw DataError("training set is empty");
  const InputShape in = state.network.input_shape();
  if (train.channels() != in.channels || train.height() != in.height || train.width() != in.width) {
    throw ConfigError("training data shape does not match the network input");
  }
  const long expected_batches = batches_per_epoch(train.size(), options.batch_size);
  if (expected_batches != state.scheduler.batches_per_epoch()) {
    throw ConfigError("schedule was set up for " + std::to_string(state.scheduler.batches_per_epoch()) +
                      " batches per epoch, data gives " + std::to_string(expected_batches));
  }

  const auto params = state.network.parameters();
  const bool do_augment = options.augment.shift_fraction > 0.0 || options.augment.horizontal_flip;
  std::optional<std::ofstream> metrics;
  if (options.metrics_path) {
    const bool fresh = !std::filesystem::exists(*options.metrics_path) || state.history.empty();
    metrics.emplace(*options.metrics_path, fresh ? std::ios::trunc : std::ios::app);
    if (!*metrics) throw ConfigError("cannot write metrics to " + options.metrics_path->string());
    if (fresh) {
      write_metrics_header(*metrics);
      for (const auto& row : state.history) write_metrics_row(*metrics, row);
    }
  }

  while (state.epoch < options.epochs) {
    const auto started = std::chrono::steady_clock::now();
    const double epoch_lr = state.scheduler.lr();
    BatchSequence batches(train, options.batch_size, true, state.rng);
    double loss_sum = 0.0;
    for (Index b = 0; b < batches.size(); ++b) {
      Batch batch = batches[b];
      if (do_augment) batch.images = augment(batch.images, options.augment, state.rng);
      const Tensor logits = state.network.forward(batch.images, true, &state.rng);
      const Tensor loss = softmax_cross_entropy(logits, batch.labels);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(state.epoch + 1) +
                              ", batch " + std::to_string(state.batch_count));
      }
      for (const auto& p : params) {
        Tensor t = p.tensor;
        t.zero_grad();
      }
      loss.backward();
      adam_step(params, state.adam, state.scheduler.lr(), state.batch_count);
      state.scheduler.step_batch();
      ++state.batch_count;
      loss_sum += value * static_cast<double>(batch.labels.size());
    }

    const EvalResult v = evaluate(state.network, val, options.batch_size);
    state.scheduler.end_epoch(val.size() > 0 ? std::optional<double>(v.error_rate) : std::nullopt);
    ++state.epoch;
    if (val.size() > 0 && v.error_rate < state.best_val_error) {
      state.best_val_error = v.error_rate;
      state.best_epoch = state.epoch;
      state.best_params.clear();
      for (const auto& p : params) state.best_params.push_back(p.tensor.value());
    }

    MetricRow row;
    row.epoch = state.epoch;
    row.batch_count = state.batch_count;
    row.lr = epoch_lr;
    row.train_loss = loss_sum / static_cast<double>(train.size());
    row.val_loss = v.loss;
    row.val_error = v.error_rate;
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    state.history.push_back(row);

    if (metrics) {
      write_metrics_row(*metrics, row);
      metrics->flush();
    }
    if (options.checkpoint_path) checkpoint_save(state, *options.checkpoint_path);
    if (options.on_epoch) options.on_epoch(row);
  }
}

TrainState fit(const NetworkSpec& spec, const LabeledDataset& train, const LabeledDataset& val,
               const ScheduleSpec& schedule, const FitOptions& options, std::uint64_t seed) {
  TrainState state = init_train_state(spec, InputShape{train.channels(), train.height(), train.width()},
                                      train.num_classes, schedule,
                                      batches_per_epoch(train.size(), options.batch_size), seed);
  fit(state, train, val, options);
  return state;
}

}  // namespace nf

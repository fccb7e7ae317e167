#pragma once

#include "neurofuzzy/datasets.hpp"
#include "neurofuzzy/network.hpp"
#include "neurofuzzy/optimizer.hpp"
#include "neurofuzzy/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nf {

/// One row of the metrics CSV.
struct MetricRow {
  int epoch = 0;           // 1-based count of completed epochs
  long batch_count = 0;    // batches applied so far in the run
  double lr = 0.0;         // rate in effect at the start of the epoch
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_error = 0.0;
  double wall_seconds = 0.0;

  /// Equality on everything except wall-clock time.
  bool same_numbers(const MetricRow& other) const;
};

inline constexpr const char* kMetricsHeader = "epoch,batch_count,lr,train_loss,val_loss,val_error,wall_seconds";
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricRow& row);

/// Everything needed to continue a run bit-exactly.
struct TrainState {
  Network network;
  std::uint64_t seed = 0;
  AdamState adam;
  LrScheduler scheduler;
  int epoch = 0;
  long batch_count = 0;
  std::mt19937_64 rng;

  double best_val_error = std::numeric_limits<double>::infinity();
  int best_epoch = 0;  // 0 while no snapshot has been taken
  std::vector<Array> best_params;

  std::vector<MetricRow> history;

  /// Copies the best snapshot's values into the network parameters.
  void restore_best();
};

/// Fresh state: network initialized from `seed`, zero Adam moments, schedule
/// at epoch 0 batch 0.
TrainState init_train_state(const NetworkSpec& spec, InputShape input, int num_classes,
                            const ScheduleSpec& schedule, long batches_per_epoch, std::uint64_t seed);

struct FitOptions {
  int epochs = 1;         ///< run until this many epochs are complete
  Index batch_size = 512;
  AugmentPolicy augment = AugmentPolicy::none();
  std::optional<std::filesystem::path> checkpoint_path;  ///< rewritten after every epoch
  std::optional<std::filesystem::path> metrics_path;     ///< CSV, appended per epoch
  std::function<void(const MetricRow&)> on_epoch;
};

long batches_per_epoch(Index dataset_size, Index batch_size);

/// Continues training `state` until options.epochs epochs are complete.
///
/// Per epoch: shuffle, augment, forward, cross-entropy, backward, Adam with the
/// scheduled rate; then validation, schedule update, best-snapshot update on
/// strict improvement, history, checkpoint. A non-finite loss raises
/// DivergenceError; the last checkpoint on disk is left untouched.
void fit(TrainState& state, const LabeledDataset& train, const LabeledDataset& val, const FitOptions& options);

/// Convenience overload starting from a fresh state.
TrainState fit(const NetworkSpec& spec, const LabeledDataset& train, const LabeledDataset& val,
               const ScheduleSpec& schedule, const FitOptions& options, std::uint64_t seed);

struct EvalResult {
  double loss = 0.0;
  double error_rate = 0.0;
  double accuracy() const { return 1.0 - error_rate; }
};

/// Mean cross-entropy and argmax error rate; dropout off, no augmentation.
EvalResult evaluate(const Network& network, const LabeledDataset& data, Index batch_size = 512);

/// Binary checkpoint: magic, version, network description, schedule, Adam
/// moments, counters, generator state, best snapshot, metric history. All
/// floating-point payloads are little-endian IEEE-754 doubles.
void checkpoint_save(const TrainState& state, const std::filesystem::path& path);
TrainState checkpoint_load(const std::filesystem::path& path);

inline constexpr char kCheckpointMagic[8] = {'N', 'F', 'Z', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace nf

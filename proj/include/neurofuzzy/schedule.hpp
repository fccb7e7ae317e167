#pragma once

#include <optional>
#include <span>
#include <vector>

namespace nf {

enum class ScheduleMode {
  Milestones,  ///< divide at fixed epochs
  Plateau      ///< divide when validation error stops improving
};

/// Compound learning-rate schedule: base rate, /10 steps, a per-epoch decay
/// and a per-batch decay that may change at `phase2_start_epoch`.
struct ScheduleSpec {
  double base_lr = 1e-3;
  ScheduleMode mode = ScheduleMode::Milestones;
  std::vector<int> milestone_epochs{100, 300};
  double milestone_factor = 0.1;
  double per_epoch_decay = 0.9995;
  double batch_decay_phase1 = 0.9995;
  double batch_decay_phase2 = 0.99995;
  int phase2_start_epoch = 100;

  // Plateau mode only.
  int plateau_patience = 20;
  double plateau_min_delta = 1e-4;
  int plateau_max_triggers = 2;

  static ScheduleSpec mnist();
  static ScheduleSpec cifar();

  void validate() const;
};

/// Closed-form learning rate at (epoch, batch) where `batch` batches of the
/// current epoch have already been applied. `plateau_epochs` lists the epochs
/// from which each plateau division is in effect (Plateau mode).
double current_lr(const ScheduleSpec& spec, int epoch, long batch, long batches_per_epoch,
                  std::span<const int> plateau_epochs = {});

/// Tracks the plateau rule: a trigger fires after `patience` consecutive
/// epochs without an improvement of at least `min_delta`.
struct PlateauTracker {
  double best = 0.0;
  bool has_best = false;
  int stale_epochs = 0;
  int triggers = 0;

  /// Returns true when a division should take effect from the next epoch.
  bool observe(double val_error, const ScheduleSpec& spec);
};

/// Incremental form of the schedule, stepped by the training loop.
class LrScheduler {
 public:
  LrScheduler() = default;
  LrScheduler(ScheduleSpec spec, long batches_per_epoch);

  double lr() const { return lr_; }
  int epoch() const { return epoch_; }
  long batch() const { return batch_; }
  const std::vector<int>& plateau_epochs() const { return plateau_epochs_; }
  const ScheduleSpec& spec() const { return spec_; }
  long batches_per_epoch() const { return batches_per_epoch_; }

  /// Applies one per-batch decay.
  void step_batch();
  /// Closes the epoch: plateau bookkeeping (if a validation error is given),
  /// then milestone divisions, then the per-epoch decay.
  void end_epoch(std::optional<double> val_error = std::nullopt);

  PlateauTracker& plateau() { return plateau_; }
  const PlateauTracker& plateau() const { return plateau_; }

  /// Restores a saved position. Used by checkpoint loading.
  void restore(double lr, int epoch, long batch, std::vector<int> plateau_epochs, PlateauTracker tracker);

 private:
  ScheduleSpec spec_;
  long batches_per_epoch_ = 1;
  double lr_ = 0.0;
  int epoch_ = 0;
  long batch_ = 0;
  std::vector<int> plateau_epochs_;
  PlateauTracker plateau_;
};

}  // namespace nf

#include "neurofuzzy/schedule.hpp"

#include "neurofuzzy/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nf {

ScheduleSpec ScheduleSpec::mnist() { return ScheduleSpec{}; }

ScheduleSpec ScheduleSpec::cifar() {
  ScheduleSpec s;
  s.mode = ScheduleMode::Plateau;
  s.milestone_epochs.clear();
  s.batch_decay_phase1 = 0.99994;
  s.batch_decay_phase2 = 0.99994;
  return s;
}

void ScheduleSpec::validate() const {
  auto in_unit = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!(base_lr > 0.0)) throw ConfigError("schedule: base learning rate must be positive");
  if (!in_unit(milestone_factor) || !in_unit(per_epoch_decay) || !in_unit(batch_decay_phase1) ||
      !in_unit(batch_decay_phase2)) {
    throw ConfigError("schedule: decay factors must lie in (0, 1]");
  }
  if (phase2_start_epoch < 0 || plateau_patience < 1 || plateau_max_triggers < 0) {
    throw ConfigError("schedule: invalid phase or plateau settings");
  }
  for (int m : milestone_epochs) {
    if (m < 1) throw ConfigError("schedule: milestone epochs must be >= 1");
  }
}

double current_lr(const ScheduleSpec& spec, int epoch, long batch, long batches_per_epoch,
                  std::span<const int> plateau_epochs) {
  const std::span<const int> steps =
      spec.mode == ScheduleMode::Milestones ? std::span<const int>(spec.milestone_epochs) : plateau_epochs;
  const auto divisions = std::count_if(steps.begin(), steps.end(), [&](int m) { return m <= epoch; });

  const long switch_epoch = spec.phase2_start_epoch;
  const long e = epoch;
  const long phase1 = std::min(e, switch_epoch) * batches_per_epoch + (e < switch_epoch ? batch : 0);
  const long phase2 = std::max(0L, e - switch_epoch) * batches_per_epoch + (e >= switch_epoch ? batch : 0);

  return spec.base_lr * std::pow(spec.milestone_factor, static_cast<double>(divisions)) *
         std::pow(spec.per_epoch_decay, static_cast<double>(epoch)) *
         std::pow(spec.batch_decay_phase1, static_cast<double>(phase1)) *
         std::pow(spec.batch_decay_phase2, static_cast<double>(phase2));
}

bool PlateauTracker::observe(double val_error, const ScheduleSpec& spec) {
  if (!has_best || val_error <= best - spec.plateau_min_delta) {
    best = has_best ? std::min(best, val_error) : val_error;
    has_best = true;
    stale_epochs = 0;
    return false;
  }
  ++stale_epochs;
  if (stale_epochs >= spec.plateau_patience && triggers < spec.plateau_max_triggers) {
    ++triggers;
    stale_epochs = 0;
    return true;
  }
  return false;
}

LrScheduler::LrScheduler(ScheduleSpec spec, long batches_per_epoch)
    : spec_(std::move(spec)), batches_per_epoch_(batches_per_epoch), lr_(spec_.base_lr) {
  spec_.validate();
  if (batches_per_epoch < 1) throw ConfigError("schedule: batches per epoch must be >= 1");
}

void LrScheduler::step_batch() {
  lr_ *= epoch_ < spec_.phase2_start_epoch ? spec_.batch_decay_phase1 : spec_.batch_decay_phase2;
  ++batch_;
}

void LrScheduler::end_epoch(std::optional<double> val_error) {
  if (spec_.mode == ScheduleMode::Plateau && val_error && plateau_.observe(*val_error, spec_)) {
    plateau_epochs_.push_back(epoch_ + 1);
  }
  ++epoch_;
  batch_ = 0;
  const auto& steps = spec_.mode == ScheduleMode::Milestones ? spec_.milestone_epochs : plateau_epochs_;
  for (int m : steps) {
    if (m == epoch_) lr_ *= spec_.milestone_factor;
  }
  lr_ *= spec_.per_epoch_decay;
}

void LrScheduler::restore(double lr, int epoch, long batch, std::vector<int> plateau_epochs,
                          PlateauTracker tracker) {
  lr_ = lr;
  epoch_ = epoch;
  batch_ = batch;
  plateau_epochs_ = std::move(plateau_epochs);
  plateau_ = tracker;
}

}  // namespace nf

#pragma once

#include "neurofuzzy/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nf {

enum class DatasetKind { MNIST, CIFAR10, CIFAR100 };
enum class Split { Train, Validation, Test };

DatasetKind parse_dataset_kind(std::string_view name);
std::string_view to_string(DatasetKind kind);

/// Images [N,C,H,W] (no gradient) with integer labels in [0, num_classes).
/// An empty dataset has an undefined `images` tensor but keeps sample_shape.
struct LabeledDataset {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 0;
  Split split = Split::Train;
  Shape sample_shape;  // C, H, W

  Index size() const { return static_cast<Index>(labels.size()); }
  Index channels() const { return sample_shape.at(0); }
  Index height() const { return sample_shape.at(1); }
  Index width() const { return sample_shape.at(2); }

  /// Records [begin, end) as a new dataset.
  LabeledDataset slice(Index begin, Index end) const;
};

/// Big-endian IDX files (image magic 2051, label magic 2049). Pixels / 255.
LabeledDataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR binary batches: [label][3072 pixels] (cifar10) or
/// [coarse][fine][3072 pixels] (cifar100, fine label kept). Pixels / 255.
LabeledDataset load_cifar(const std::vector<std::filesystem::path>& batches, DatasetKind variant);

/// Record length in bytes of a CIFAR binary batch.
constexpr std::size_t cifar_record_size(DatasetKind variant) {
  return (variant == DatasetKind::CIFAR100 ? 2 : 1) + 3 * 32 * 32;
}

/// The last `val_count` records become the validation split, order preserved.
std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds, Index val_count);

/// Per image: subtract its mean, divide by its standard deviation + 1e-8.
LabeledDataset normalize_samplewise(const LabeledDataset& ds);

struct AugmentPolicy {
  double shift_fraction = 0.0;
  bool horizontal_flip = false;

  static AugmentPolicy mnist() { return {0.10, false}; }
  static AugmentPolicy cifar() { return {0.20, true}; }
  static AugmentPolicy none() { return {0.0, false}; }

  /// Largest integer shift for a dimension of `size` pixels.
  Index max_shift(Index size) const;
};

/// Shifts every image by a random integer offset per axis, zero filling the
/// vacated pixels, then flips horizontally with probability 1/2 if enabled.
Tensor augment(const Tensor& batch, const AugmentPolicy& policy, std::mt19937_64& rng);

/// Translates one image plane stack by (dy, dx) and optionally mirrors it.
/// Exposed for tests.
void shift_and_flip(const double* src, double* dst, Index channels, Index height, Index width,
                    Index dy, Index dx, bool flip);

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

/// Ordered mini-batches over a dataset. Shuffling uses the generator passed
/// to the constructor; the final partial batch is kept.
class BatchSequence {
 public:
  BatchSequence(const LabeledDataset& ds, Index batch_size, bool shuffle, std::mt19937_64& rng);

  Index size() const { return (static_cast<Index>(order_.size()) + batch_size_ - 1) / batch_size_; }
  Batch operator[](Index i) const;
  const std::vector<Index>& order() const { return order_; }

 private:
  const LabeledDataset* ds_;
  Index batch_size_;
  std::vector<Index> order_;
};

/// Gathers records `indices` into one batch.
Batch gather(const LabeledDataset& ds, const std::vector<Index>& indices);

/// Locates the standard file names under `root` and loads train and test sets.
struct DatasetFiles {
  LabeledDataset train;
  LabeledDataset test;
};
DatasetFiles load_dataset(DatasetKind kind, const std::filesystem::path& root);

}  // namespace nf

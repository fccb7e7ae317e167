#include "neurofuzzy/datasets.hpp"

#include "neurofuzzy/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace nf {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const fs::path& path) {
  if (offset + 4 > bytes.size()) throw FormatError(path.string() + ": truncated header", bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "mnist") return DatasetKind::MNIST;
  if (name == "cifar10") return DatasetKind::CIFAR10;
  if (name == "cifar100") return DatasetKind::CIFAR100;
  throw ConfigError("unknown dataset '" + std::string(name) + "' (expected mnist, cifar10 or cifar100)");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::MNIST: return "mnist";
    case DatasetKind::CIFAR10: return "cifar10";
    case DatasetKind::CIFAR100: return "cifar100";
  }
  return "?";
}

LabeledDataset LabeledDataset::slice(Index begin, Index end) const {
  if (begin < 0 || end > size() || begin > end) throw ConfigError("dataset slice out of range");
  LabeledDataset out;
  out.num_classes = num_classes;
  out.split = split;
  out.sample_shape = sample_shape;
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  if (end > begin) {
    const Index record = channels() * height() * width();
    out.images = Tensor({end - begin, channels(), height(), width()},
                        images.value().segment(begin * record, (end - begin) * record));
  } else {
    out.images = Tensor();
  }
  return out;
}

LabeledDataset load_mnist(const fs::path& image_path, const fs::path& label_path) {
  const auto img = read_file(image_path);
  const auto lab = read_file(label_path);

  if (read_be32(img, 0, image_path) != 2051) throw FormatError(image_path.string() + ": bad image magic", 0);
  if (read_be32(lab, 0, label_path) != 2049) throw FormatError(label_path.string() + ": bad label magic", 0);
  const std::uint32_t count = read_be32(img, 4, image_path);
  const std::uint32_t rows = read_be32(img, 8, image_path);
  const std::uint32_t cols = read_be32(img, 12, image_path);
  const std::uint32_t label_count = read_be32(lab, 4, label_path);
  if (count != label_count) {
    throw FormatError(label_path.string() + ": " + std::to_string(label_count) + " labels for " +
                          std::to_string(count) + " images",
                      4);
  }
  if (count == 0 || rows == 0 || cols == 0) throw FormatError(image_path.string() + ": empty dataset", 4);
  const std::size_t pixels = std::size_t{count} * rows * cols;
  if (img.size() != 16 + pixels) {
    throw FormatError(image_path.string() + ": expected " + std::to_string(16 + pixels) + " bytes, found " +
                          std::to_string(img.size()),
                      std::min(img.size(), 16 + pixels));
  }
  if (lab.size() != 8 + std::size_t{count}) {
    throw FormatError(label_path.string() + ": expected " + std::to_string(8 + count) + " bytes, found " +
                          std::to_string(lab.size()),
                      std::min(lab.size(), std::size_t{8} + count));
  }

  LabeledDataset ds;
  ds.num_classes = 10;
  Array values(static_cast<Index>(pixels));
  for (std::size_t i = 0; i < pixels; ++i) values(static_cast<Index>(i)) = img[16 + i] / 255.0;
  ds.images = Tensor({Index{count}, 1, Index{rows}, Index{cols}}, std::move(values));
  ds.sample_shape = {1, Index{rows}, Index{cols}};
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = lab[8 + i];
    if (label >= ds.num_classes) throw FormatError(label_path.string() + ": label out of range", 8 + i);
    ds.labels[i] = label;
  }
  return ds;
}

LabeledDataset load_cifar(const std::vector<fs::path>& batches, DatasetKind variant) {
  if (variant == DatasetKind::MNIST) throw ConfigError("load_cifar: variant must be cifar10 or cifar100");
  if (batches.empty()) throw ConfigError("load_cifar: no batch files given");
  const std::size_t record = cifar_record_size(variant);
  const std::size_t header = record - 3072;

  std::vector<std::vector<unsigned char>> files;
  std::size_t total = 0;
  for (const fs::path& p : batches) {
    files.push_back(read_file(p));
    const std::size_t size = files.back().size();
    if (size == 0 || size % record != 0) {
      throw FormatError(p.string() + ": size " + std::to_string(size) + " is not a multiple of the " +
                            std::to_string(record) + "-byte record",
                        size - size % record);
    }
    total += size / record;
  }

  LabeledDataset ds;
  ds.num_classes = variant == DatasetKind::CIFAR100 ? 100 : 10;
  Array values(static_cast<Index>(total * 3072));
  ds.labels.reserve(total);
  Index out = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = files[f];
    for (std::size_t off = 0; off < bytes.size(); off += record) {
      const int label = bytes[off + header - 1];
      if (label >= ds.num_classes) throw FormatError(batches[f].string() + ": label out of range", off);
      ds.labels.push_back(label);
      for (std::size_t i = 0; i < 3072; ++i) values(out++) = bytes[off + header + i] / 255.0;
    }
  }
  ds.images = Tensor({static_cast<Index>(total), 3, 32, 32}, std::move(values));
  ds.sample_shape = {3, 32, 32};
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds, Index val_count) {
  if (val_count < 0 || val_count >= ds.size()) {
    throw ConfigError("validation count " + std::to_string(val_count) + " must be in [0, " +
                      std::to_string(ds.size()) + ")");
  }
  auto train = ds.slice(0, ds.size() - val_count);
  auto val = ds.slice(ds.size() - val_count, ds.size());
  train.split = Split::Train;
  val.split = Split::Validation;
  return {std::move(train), std::move(val)};
}

LabeledDataset normalize_samplewise(const LabeledDataset& ds) {
  LabeledDataset out = ds;
  if (ds.size() == 0) return out;
  out.images = ds.images.clone();
  const Index record = ds.channels() * ds.height() * ds.width();
  Array& v = out.images.value();
  for (Index i = 0; i < ds.size(); ++i) {
    auto img = v.segment(i * record, record);
    const double mean = img.mean();
    img -= mean;
    const double stddev = std::sqrt(img.square().mean());
    img /= stddev + 1e-8;
  }
  return out;
}

Index AugmentPolicy::max_shift(Index size) const {
  return static_cast<Index>(std::lround(shift_fraction * static_cast<double>(size)));
}

void shift_and_flip(const double* src, double* dst, Index channels, Index height, Index width, Index dy,
                    Index dx, bool flip) {
  for (Index c = 0; c < channels; ++c) {
    const double* s = src + c * height * width;
    double* d = dst + c * height * width;
    for (Index y = 0; y < height; ++y) {
      const Index sy = y - dy;
      for (Index x = 0; x < width; ++x) {
        const Index tx = flip ? width - 1 - x : x;
        const Index sx = tx - dx;
        d[y * width + x] = (sy < 0 || sy >= height || sx < 0 || sx >= width) ? 0.0 : s[sy * width + sx];
      }
    }
  }
}

Tensor augment(const Tensor& batch, const AugmentPolicy& policy, std::mt19937_64& rng) {
  if (batch.rank() != 4) throw ConfigError("augment: expected N x C x H x W batch");
  if (!(policy.shift_fraction >= 0.0) || policy.shift_fraction >= 1.0) {
    throw ConfigError("augment: shift fraction must lie in [0, 1)");
  }
  const Index n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const Index my = policy.max_shift(h), mx = policy.max_shift(w);
  std::uniform_int_distribution<Index> shift_y(-my, my), shift_x(-mx, mx);
  std::bernoulli_distribution coin(0.5);
  Tensor out(batch.shape());
  const Index record = c * h * w;
  for (Index i = 0; i < n; ++i) {
    const Index dy = shift_y(rng);
    const Index dx = shift_x(rng);
    const bool flip = policy.horizontal_flip && coin(rng);
    shift_and_flip(batch.value().data() + i * record, out.value().data() + i * record, c, h, w, dy, dx, flip);
  }
  return out;
}

BatchSequence::BatchSequence(const LabeledDataset& ds, Index batch_size, bool shuffle, std::mt19937_64& rng)
    : ds_(&ds), batch_size_(batch_size), order_(static_cast<std::size_t>(ds.size())) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::iota(order_.begin(), order_.end(), Index{0});
  if (shuffle) std::shuffle(order_.begin(), order_.end(), rng);
}

Batch BatchSequence::operator[](Index i) const {
  const Index begin = i * batch_size_;
  const Index end = std::min(begin + batch_size_, static_cast<Index>(order_.size()));
  return gather(*ds_, std::vector<Index>(order_.begin() + begin, order_.begin() + end));
}

Batch gather(const LabeledDataset& ds, const std::vector<Index>& indices) {
  const Index record = ds.channels() * ds.height() * ds.width();
  Batch b;
  b.images = Tensor({static_cast<Index>(indices.size()), ds.channels(), ds.height(), ds.width()});
  b.labels.reserve(indices.size());
  Index row = 0;
  for (Index idx : indices) {
    b.images.value().segment(row++ * record, record) = ds.images.value().segment(idx * record, record);
    b.labels.push_back(ds.labels[static_cast<std::size_t>(idx)]);
  }
  return b;
}

namespace {

fs::path find_file(const fs::path& root, const std::vector<std::string>& subdirs, const std::string& name) {
  for (const auto& sub : subdirs) {
    const fs::path p = sub.empty() ? root / name : root / sub / name;
    if (fs::exists(p)) return p;
  }
  throw DataError("dataset file '" + name + "' not found under " + root.string());
}

}  // namespace

DatasetFiles load_dataset(DatasetKind kind, const fs::path& root) {
  DatasetFiles out;
  switch (kind) {
    case DatasetKind::MNIST: {
      const std::vector<std::string> dirs{"", "mnist", "MNIST/raw"};
      out.train = load_mnist(find_file(root, dirs, "train-images-idx3-ubyte"),
                             find_file(root, dirs, "train-labels-idx1-ubyte"));
      out.test = load_mnist(find_file(root, dirs, "t10k-images-idx3-ubyte"),
                            find_file(root, dirs, "t10k-labels-idx1-ubyte"));
      break;
    }
    case DatasetKind::CIFAR10: {
      const std::vector<std::string> dirs{"", "cifar-10-batches-bin"};
      std::vector<fs::path> train;
      for (int i = 1; i <= 5; ++i) train.push_back(find_file(root, dirs, "data_batch_" + std::to_string(i) + ".bin"));
      out.train = load_cifar(train, kind);
      out.test = load_cifar({find_file(root, dirs, "test_batch.bin")}, kind);
      break;
    }
    case DatasetKind::CIFAR100: {
      const std::vector<std::string> dirs{"", "cifar-100-binary"};
      out.train = load_cifar({find_file(root, dirs, "train.bin")}, kind);
      out.test = load_cifar({find_file(root, dirs, "test.bin")}, kind);
      break;
    }
  }
  out.train.split = Split::Train;
  out.test.split = Split::Test;
  return out;
}

}  // namespace nf

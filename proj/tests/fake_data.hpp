#pragma once

// Writers for small MNIST / CIFAR files in their on-disk formats.

#include "neurofuzzy/datasets.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace nf::testing {

using Bytes = std::vector<unsigned char>;

inline void put_be32(Bytes& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

inline void write_file(const std::filesystem::path& p, const Bytes& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Bytes read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(is), {});
}

struct IdxPair {
  Bytes images, labels;
};

inline IdxPair make_idx(std::uint32_t count, std::uint32_t rows, std::uint32_t cols, std::mt19937_64& rng) {
  IdxPair p;
  put_be32(p.images, 2051);
  put_be32(p.images, count);
  put_be32(p.images, rows);
  put_be32(p.images, cols);
  std::uniform_int_distribution<int> byte(0, 255), digit(0, 9);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) p.images.push_back(static_cast<unsigned char>(byte(rng)));
  put_be32(p.labels, 2049);
  put_be32(p.labels, count);
  for (std::uint32_t i = 0; i < count; ++i) p.labels.push_back(static_cast<unsigned char>(digit(rng)));
  return p;
}

inline Bytes make_cifar(DatasetKind kind, int records, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> byte(0, 255);
  const int classes = kind == DatasetKind::CIFAR100 ? 100 : 10;
  std::uniform_int_distribution<int> label(0, classes - 1);
  Bytes b;
  for (int r = 0; r < records; ++r) {
    if (kind == DatasetKind::CIFAR100) b.push_back(static_cast<unsigned char>(label(rng) % 20));
    b.push_back(static_cast<unsigned char>(label(rng)));
    for (int i = 0; i < 3072; ++i) b.push_back(static_cast<unsigned char>(byte(rng)));
  }
  return b;
}

/// Random 28x28 MNIST files with the standard names.
inline void write_fake_mnist(const std::filesystem::path& dir, std::uint32_t train, std::uint32_t test,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::filesystem::create_directories(dir);
  const IdxPair tr = make_idx(train, 28, 28, rng);
  const IdxPair te = make_idx(test, 28, 28, rng);
  write_file(dir / "train-images-idx3-ubyte", tr.images);
  write_file(dir / "train-labels-idx1-ubyte", tr.labels);
  write_file(dir / "t10k-images-idx3-ubyte", te.images);
  write_file(dir / "t10k-labels-idx1-ubyte", te.labels);
}

/// Random CIFAR binaries with the standard names; `per_batch` records in
/// each of the five cifar10 training batches.
inline void write_fake_cifar(const std::filesystem::path& dir, DatasetKind kind, int per_batch, int test,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::filesystem::create_directories(dir);
  if (kind == DatasetKind::CIFAR10) {
    for (int i = 1; i <= 5; ++i)
      write_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), make_cifar(kind, per_batch, rng));
    write_file(dir / "test_batch.bin", make_cifar(kind, test, rng));
  } else {
    write_file(dir / "train.bin", make_cifar(kind, 5 * per_batch, rng));
    write_file(dir / "test.bin", make_cifar(kind, test, rng));
  }
}

}  // namespace nf::testing

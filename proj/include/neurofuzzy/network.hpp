#pragma once

#include "neurofuzzy/fuzzy_layers.hpp"
#include "neurofuzzy/grad_check.hpp"
#include "neurofuzzy/network_spec.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nf {

struct DenseParams {
  Tensor weights;  // [D,U]
  Tensor bias;     // [U]
};

/// Output shape of one layer, excluding the batch axis.
struct ShapeTraceEntry {
  std::string label;
  Shape shape;
};

/// A chain of fuzzy layers followed by fully connected layers.
class Network {
 public:
  /// Instantiates every layer. Throws ConfigError naming the layer when a
  /// fuzzy set no longer fits the running spatial size, or when the final
  /// fl width differs from `num_classes`.
  static Network build(const NetworkSpec& spec, InputShape input, int num_classes, std::uint64_t seed);

  /// Logits [N, num_classes]. `rng` drives dropout and may be null when
  /// `training` is false.
  Tensor forward(const Tensor& images, bool training, std::mt19937_64* rng) const;

  std::vector<NamedTensor> parameters() const;
  Index parameter_count() const;

  const NetworkSpec& spec() const { return spec_; }
  InputShape input_shape() const { return input_; }
  int num_classes() const { return num_classes_; }
  const std::vector<ShapeTraceEntry>& shape_trace() const { return trace_; }
  std::string describe() const;

  const std::vector<FuzzyLayerParams>& fuzzy_layers() const { return fuzzy_; }
  const std::vector<DenseParams>& dense_layers() const { return dense_; }

 private:
  NetworkSpec spec_;
  InputShape input_;
  int num_classes_ = 0;
  std::vector<FuzzyLayerParams> fuzzy_;
  std::vector<DenseParams> dense_;
  std::vector<ShapeTraceEntry> trace_;
};

}  // namespace nf

#include "neurofuzzy/network.hpp"

#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/ops.hpp"

#include <cmath>
#include <sstream>

namespace nf {

Network Network::build(const NetworkSpec& spec, InputShape input, int num_classes, std::uint64_t seed) {
  spec.validate();
  if (input.channels < 1 || input.height < 1 || input.width < 1) throw ConfigError("invalid input shape");
  if (spec.input && *spec.input != input) {
    throw ConfigError("network spec declares input " + to_string(Shape{spec.input->channels, spec.input->height,
                                                                       spec.input->width}) +
                      " but data has " + to_string(Shape{input.channels, input.height, input.width}));
  }
  if (spec.layers.back().units != num_classes) {
    throw ConfigError("final fl layer has " + std::to_string(spec.layers.back().units) + " units but the data has " +
                      std::to_string(num_classes) + " classes");
  }

  Network net;
  net.spec_ = spec;
  net.input_ = input;
  net.num_classes_ = num_classes;
  std::mt19937_64 rng(seed);

  Index c = input.channels, h = input.height, w = input.width;
  Index features = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string label = "L" + std::to_string(i) + "." + std::string(to_string(l.kind));
    if (l.kind != LayerKind::FL) {
      if (l.kernel > h || l.kernel > w) {
        throw ConfigError(label + ": fuzzy set " + std::to_string(l.kernel) + "x" + std::to_string(l.kernel) +
                          " exceeds the incoming " + std::to_string(h) + "x" + std::to_string(w) + " maps");
      }
      net.fuzzy_.push_back(init_params(l.kind, l.rules, l.outputs, c, l.kernel, l.stride, rng));
      c = l.outputs;
      h = fuzzy_output_size(l.kind, h, l.kernel, l.stride);
      w = fuzzy_output_size(l.kind, w, l.kernel, l.stride);
      net.trace_.push_back({label, {c, h, w}});
      continue;
    }
    if (features == 0) {
      features = c * h * w;
      net.trace_.push_back({"flatten", {features}});
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(features + l.units));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseParams d{Tensor({features, l.units}, 0.0, true), Tensor({l.units}, 0.0, true)};
    for (Index k = 0; k < d.weights.numel(); ++k) d.weights[k] = dist(rng);
    net.dense_.push_back(std::move(d));
    features = l.units;
    net.trace_.push_back({label, {features}});
  }
  return net;
}

Tensor Network::forward(const Tensor& images, bool training, std::mt19937_64* rng) const {
  if (images.rank() != 4 || images.dim(1) != input_.channels || images.dim(2) != input_.height ||
      images.dim(3) != input_.width) {
    throw ConfigError("network input must be N x " +
                      to_string(Shape{input_.channels, input_.height, input_.width}) + ", got " +
                      to_string(images.shape()));
  }
  Tensor x = images;
  std::size_t fuzzy_index = 0, dense_index = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.kind != LayerKind::FL) {
      x = fuzzy_forward(x, fuzzy_[fuzzy_index++]);
      continue;
    }
    if (x.rank() != 2) x = flatten(x);
    const DenseParams& d = dense_[dense_index++];
    x = dense(x, d.weights, d.bias);
    if (i + 1 == spec_.layers.size()) break;
    x = l.activation == Activation::ReLU ? relu(x) : leaky_relu(x, 0.01);
    if (l.dropout > 0.0 && training) {
      if (!rng) throw UsageError("network forward: dropout in training mode needs a generator");
      x = dropout(x, l.dropout, true, *rng);
    }
  }
  return x;
}

std::vector<NamedTensor> Network::parameters() const {
  std::vector<NamedTensor> out;
  std::size_t fuzzy_index = 0, dense_index = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const std::string prefix = "L" + std::to_string(i) + "." + std::string(to_string(l.kind)) + ".";
    if (l.kind != LayerKind::FL) {
      for (auto& p : fuzzy_[fuzzy_index++].named_parameters(prefix)) out.push_back(std::move(p));
    } else {
      const DenseParams& d = dense_[dense_index++];
      out.push_back({prefix + "weights", d.weights});
      out.push_back({prefix + "bias", d.bias});
    }
  }
  return out;
}

Index Network::parameter_count() const {
  Index n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

std::string Network::describe() const {
  std::ostringstream os;
  os << "input " << to_string(Shape{input_.channels, input_.height, input_.width}) << '\n';
  for (const auto& e : trace_) os << "  " << e.label << " -> " << to_string(e.shape) << '\n';
  os << "parameters: " << parameter_count() << '\n';
  return os.str();
}

}  // namespace nf

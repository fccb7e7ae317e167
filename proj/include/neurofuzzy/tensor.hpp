#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace nf {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Array = Eigen::ArrayXd;

/// Row-major matrix types used to view tensor storage.
using MatrixR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<MatrixR>;
using ConstMatrixMap = Eigen::Map<const MatrixR>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

/// One vertex of the dynamic computation graph. Leaves have no inputs.
struct Node {
  Shape shape;
  Array value;
  Array grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  Array& grad_buffer();
};

}  // namespace detail

/// Dense double-precision N-d array participating in reverse-mode autodiff.
///
/// Copies share storage and graph position (handle semantics); use clone()
/// for an independent leaf. Images use N x C x H x W layout, row-major.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, Array values, bool requires_grad = false);
  Tensor(Shape shape, std::initializer_list<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const;
  Index dim(std::size_t axis) const;
  std::size_t rank() const;
  Index numel() const;
  bool defined() const { return node_ != nullptr; }

  Array& value();
  const Array& value() const;
  double item() const;
  double operator[](Index flat) const { return value()(flat); }
  double& operator[](Index flat) { return value()(flat); }
  /// Element of a rank-4 tensor.
  double at(Index n, Index c, Index h, Index w) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  const Array& grad() const;
  void zero_grad();

  /// Back-propagates from this scalar; throws UsageError when numel() != 1.
  void backward() const;

  /// Fresh leaf with a copy of the values and no history.
  Tensor clone() const;
  /// Leaf sharing nothing with the graph; values copied.
  Tensor detach() const { return clone().set_requires_grad(false); }

  /// Same values viewed with another shape (differentiable).
  Tensor reshape(Shape shape) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph construction on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// When enabled, every op result is scanned for NaN/Inf and a DataError is
/// thrown on the first non-finite value. On by default in debug builds.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

namespace detail {

/// Creates an op result. The backward rule and inputs are only retained when
/// grad mode is on and at least one input requires a gradient.
Tensor make_result(Shape shape, Array value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace nf

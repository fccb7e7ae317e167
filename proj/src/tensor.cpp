#include "neurofuzzy/tensor.hpp"

#include "neurofuzzy/errors.hpp"

#include <sstream>
#include <unordered_set>

namespace nf {

namespace {

thread_local bool g_grad_enabled = true;
#ifdef NDEBUG
thread_local bool g_finite_checks = false;
#else
thread_local bool g_finite_checks = true;
#endif

void check_shape(const Shape& shape) {
  for (Index d : shape) {
    if (d <= 0) throw ConfigError("tensor dimensions must be positive, got " + to_string(shape));
  }
}

}  // namespace

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Array& detail::Node::grad_buffer() {
  if (grad.size() == 0) grad = Array::Zero(value.size());
  return grad;
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  check_shape(shape);
  node_ = std::make_shared<detail::Node>();
  node_->value = Array::Constant(nf::numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, Array values, bool requires_grad) {
  check_shape(shape);
  if (values.size() != nf::numel(shape)) {
    throw ConfigError("value count " + std::to_string(values.size()) +
                      " does not match shape " + to_string(shape));
  }
  node_ = std::make_shared<detail::Node>();
  node_->value = std::move(values);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values, bool requires_grad)
    : Tensor(std::move(shape),
             Eigen::Map<const Array>(values.begin(), static_cast<Index>(values.size())),
             requires_grad) {}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, value, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
Index Tensor::dim(std::size_t axis) const { return node_->shape.at(axis); }
std::size_t Tensor::rank() const { return node_->shape.size(); }
Index Tensor::numel() const { return node_->value.size(); }

Array& Tensor::value() { return node_->value; }
const Array& Tensor::value() const { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + to_string(shape()));
  return node_->value(0);
}

double Tensor::at(Index n, Index c, Index h, Index w) const {
  const Shape& s = node_->shape;
  return node_->value(((n * s[1] + c) * s[2] + h) * s[3] + w);
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return node_->inputs.empty(); }

bool Tensor::has_grad() const { return node_->grad.size() != 0; }

const Array& Tensor::grad() const {
  if (!has_grad()) throw UsageError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.resize(0); }

void Tensor::backward() const {
  if (numel() != 1) {
    throw UsageError("backward() requires a scalar root, got shape " + to_string(shape()));
  }
  if (!requires_grad()) throw UsageError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS; reversed, this is a topological order from the root.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are transient; leaves accumulate across calls.
  for (detail::Node* n : order) {
    if (!n->inputs.empty()) n->grad.resize(0);
  }
  node_->grad_buffer() += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Tensor Tensor::clone() const {
  return Tensor(node_->shape, node_->value, node_->requires_grad);
}

Tensor Tensor::reshape(Shape new_shape) const {
  check_shape(new_shape);
  if (nf::numel(new_shape) != numel()) {
    throw ConfigError("cannot reshape " + to_string(shape()) + " to " + to_string(new_shape));
  }
  return detail::make_result(std::move(new_shape), node_->value, {*this}, [](detail::Node& self) {
    self.inputs[0]->grad_buffer() += self.grad;
  });
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

Tensor detail::make_result(Shape shape, Array value, std::vector<Tensor> inputs,
                           std::function<void(Node&)> backward) {
  if (g_finite_checks && !value.allFinite()) {
    throw DataError("non-finite value produced in tensor of shape " + to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace nf

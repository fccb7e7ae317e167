#include "neurofuzzy/ops.hpp"

#include "neurofuzzy/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nf {

namespace {

using detail::Node;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ConfigError(std::string(what) + ": expected rank " + std::to_string(rank) +
                      ", got shape " + to_string(t.shape()));
  }
}

bool wants_grad(const Node& self, std::size_t i) {
  return i < self.inputs.size() && self.inputs[i]->requires_grad;
}

struct ConvGeometry {
  Index n, c, h, w;        // input
  Index k, kh, kw;         // filters
  Index stride;
  Padding2d pad;
  Index oh, ow;            // output

  Index rows() const { return c * kh * kw; }
  Index cols() const { return n * oh * ow; }
};

// Gathers every (zero-padded) receptive field of sample `x` ([C,H,W]) into
// one column of a [C*kh*kw, oh*ow] matrix.
void im2col(const ConvGeometry& g, const double* x, MatrixR& cols) {
  for (Index c = 0; c < g.c; ++c) {
    const double* src = x + c * g.h * g.w;
    for (Index ki = 0; ki < g.kh; ++ki) {
      for (Index kj = 0; kj < g.kw; ++kj) {
        double* dst = cols.row((c * g.kh + ki) * g.kw + kj).data();
        for (Index oi = 0; oi < g.oh; ++oi) {
          const Index ii = oi * g.stride + ki - g.pad.top;
          double* drow = dst + oi * g.ow;
          if (ii < 0 || ii >= g.h) {
            std::fill(drow, drow + g.ow, 0.0);
            continue;
          }
          const double* srow = src + ii * g.w;
          if (g.stride == 1) {
            const Index lo = std::clamp<Index>(g.pad.left - kj, 0, g.ow);
            const Index hi = std::clamp<Index>(g.w + g.pad.left - kj, lo, g.ow);
            std::fill(drow, drow + lo, 0.0);
            std::copy(srow + lo + kj - g.pad.left, srow + hi + kj - g.pad.left, drow + lo);
            std::fill(drow + hi, drow + g.ow, 0.0);
          } else {
            for (Index oj = 0; oj < g.ow; ++oj) {
              const Index jj = oj * g.stride + kj - g.pad.left;
              drow[oj] = (jj < 0 || jj >= g.w) ? 0.0 : srow[jj];
            }
          }
        }
      }
    }
  }
}

void col2im_accumulate(const ConvGeometry& g, const MatrixR& cols, double* gx) {
  for (Index c = 0; c < g.c; ++c) {
    double* dst = gx + c * g.h * g.w;
    for (Index ki = 0; ki < g.kh; ++ki) {
      for (Index kj = 0; kj < g.kw; ++kj) {
        const double* src = cols.row((c * g.kh + ki) * g.kw + kj).data();
        for (Index oi = 0; oi < g.oh; ++oi) {
          const Index ii = oi * g.stride + ki - g.pad.top;
          if (ii < 0 || ii >= g.h) continue;
          double* drow = dst + ii * g.w;
          const double* srow = src + oi * g.ow;
          for (Index oj = 0; oj < g.ow; ++oj) {
            const Index jj = oj * g.stride + kj - g.pad.left;
            if (jj >= 0 && jj < g.w) drow[jj] += srow[oj];
          }
        }
      }
    }
  }
}

// A 1x1, stride-1, unpadded convolution reads the input planes directly.
bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad.top == 0 && g.pad.left == 0 && g.pad.bottom == 0 &&
         g.pad.right == 0;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& filters, Index stride, Padding2d padding,
              const std::optional<Tensor>& bias) {
  require_rank(input, 4, "conv2d input");
  require_rank(filters, 4, "conv2d filters");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (padding.top < 0 || padding.left < 0 || padding.bottom < 0 || padding.right < 0) {
    throw ConfigError("conv2d: padding must be non-negative");
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 filters.dim(0), filters.dim(2), filters.dim(3), stride, padding, 0, 0};
  if (filters.dim(1) != g.c) {
    throw ConfigError("conv2d: filter channels " + std::to_string(filters.dim(1)) +
                      " != input channels " + std::to_string(g.c));
  }
  const Index ph = g.h + padding.top + padding.bottom;
  const Index pw = g.w + padding.left + padding.right;
  if (g.kh > ph || g.kw > pw) {
    throw ConfigError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                      " exceeds padded input " + std::to_string(ph) + "x" + std::to_string(pw));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.k)) {
    throw ConfigError("conv2d: bias must have shape [" + std::to_string(g.k) + "]");
  }
  g.oh = conv_output_size(g.h, g.kh, stride, padding.top + padding.bottom);
  g.ow = conv_output_size(g.w, g.kw, stride, padding.left + padding.right);
  const Index plane = g.oh * g.ow;

  const bool pointwise = is_pointwise(g);
  const Index in_size = g.c * g.h * g.w;
  const Array& x = input.value();
  ConstMatrixMap weights(filters.value().data(), g.k, g.rows());
  Array out(g.n * g.k * plane);
  MatrixR cols(pointwise ? 0 : g.rows(), pointwise ? 0 : plane);
  for (Index n = 0; n < g.n; ++n) {
    MatrixMap dst(out.data() + n * g.k * plane, g.k, plane);
    if (pointwise) {
      dst.noalias() = weights * ConstMatrixMap(x.data() + n * in_size, g.c, plane);
    } else {
      im2col(g, x.data() + n * in_size, cols);
      dst.noalias() = weights * cols;
    }
    if (bias) dst.colwise() += bias->value().matrix();
  }

  std::vector<Tensor> inputs{input, filters};
  if (bias) inputs.push_back(*bias);
  return detail::make_result(
      {g.n, g.k, g.oh, g.ow}, std::move(out), std::move(inputs), [g, pointwise](Node& self) {
        const Index plane = g.oh * g.ow;
        const Index in_size = g.c * g.h * g.w;
        const bool want_x = wants_grad(self, 0), want_w = wants_grad(self, 1);
        const Array& x = self.inputs[0]->value;
        ConstMatrixMap weights(self.inputs[1]->value.data(), g.k, g.rows());
        double* gx = want_x ? self.inputs[0]->grad_buffer().data() : nullptr;
        double* gw_data = want_w ? self.inputs[1]->grad_buffer().data() : nullptr;
        MatrixR cols(pointwise ? 0 : g.rows(), pointwise ? 0 : plane);
        MatrixR gcols(pointwise ? 0 : g.rows(), pointwise ? 0 : plane);
        for (Index n = 0; n < g.n; ++n) {
          ConstMatrixMap gout(self.grad.data() + n * g.k * plane, g.k, plane);
          if (want_w) {
            MatrixMap gw(gw_data, g.k, g.rows());
            if (pointwise) {
              gw.noalias() += gout * ConstMatrixMap(x.data() + n * in_size, g.c, plane).transpose();
            } else {
              im2col(g, x.data() + n * in_size, cols);
              gw.noalias() += gout * cols.transpose();
            }
          }
          if (want_x) {
            if (pointwise) {
              MatrixMap(gx + n * in_size, g.c, plane).noalias() += weights.transpose() * gout;
            } else {
              gcols.noalias() = weights.transpose() * gout;
              col2im_accumulate(g, gcols, gx + n * in_size);
            }
          }
          if (wants_grad(self, 2)) self.inputs[2]->grad_buffer() += gout.rowwise().sum().array();
        }
      });
}

Tensor clamp01(const Tensor& input) {
  Array out = input.value().max(0.0).min(1.0);
  return detail::make_result(input.shape(), std::move(out), {input}, [](Node& self) {
    const Array& x = self.inputs[0]->value;
    self.inputs[0]->grad_buffer() += ((x > 0.0) && (x < 1.0)).cast<double>() * self.grad;
  });
}

Tensor normalize_rules(const Tensor& memberships, double epsilon) {
  require_rank(memberships, 4, "normalize_rules");
  if (!(epsilon > 0.0)) throw ConfigError("normalize_rules: epsilon must be positive");
  const Index n = memberships.dim(0), k = memberships.dim(1);
  const Index plane = memberships.dim(2) * memberships.dim(3);
  const Array& m = memberships.value();

  // denom[n * plane + p] = sum_k m + eps
  Array denom = Array::Constant(n * plane, epsilon);
  for (Index i = 0; i < n; ++i) {
    for (Index r = 0; r < k; ++r) denom.segment(i * plane, plane) += m.segment((i * k + r) * plane, plane);
  }
  Array out(m.size());
  for (Index i = 0; i < n; ++i) {
    for (Index r = 0; r < k; ++r) {
      out.segment((i * k + r) * plane, plane) =
          m.segment((i * k + r) * plane, plane) / denom.segment(i * plane, plane);
    }
  }
  return detail::make_result(
      memberships.shape(), std::move(out), {memberships},
      [n, k, plane, denom = std::move(denom)](Node& self) {
        const Array& m = self.inputs[0]->value;
        // d out_r / d m_j = delta_rj / D - m_r / D^2
        Array weighted = Array::Zero(n * plane);
        for (Index i = 0; i < n; ++i) {
          for (Index r = 0; r < k; ++r) {
            weighted.segment(i * plane, plane) +=
                self.grad.segment((i * k + r) * plane, plane) * m.segment((i * k + r) * plane, plane);
          }
        }
        Array& gin = self.inputs[0]->grad_buffer();
        for (Index i = 0; i < n; ++i) {
          const auto d = denom.segment(i * plane, plane);
          for (Index r = 0; r < k; ++r) {
            gin.segment((i * k + r) * plane, plane) +=
                self.grad.segment((i * k + r) * plane, plane) / d -
                weighted.segment(i * plane, plane) / d.square();
          }
        }
      });
}

Tensor pad2d(const Tensor& input, Padding2d p) {
  require_rank(input, 4, "pad2d");
  if (p.top < 0 || p.left < 0 || p.bottom < 0 || p.right < 0) {
    throw ConfigError("pad2d: padding must be non-negative");
  }
  const Index nc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index ph = h + p.top + p.bottom, pw = w + p.left + p.right;
  Array out = Array::Zero(nc * ph * pw);
  const Array& x = input.value();
  for (Index m = 0; m < nc; ++m) {
    for (Index i = 0; i < h; ++i) {
      out.segment(m * ph * pw + (i + p.top) * pw + p.left, w) = x.segment(m * h * w + i * w, w);
    }
  }
  return detail::make_result({input.dim(0), input.dim(1), ph, pw}, std::move(out), {input},
                             [nc, h, w, ph, pw, p](Node& self) {
                               Array& gin = self.inputs[0]->grad_buffer();
                               for (Index m = 0; m < nc; ++m) {
                                 for (Index i = 0; i < h; ++i) {
                                   gin.segment(m * h * w + i * w, w) +=
                                       self.grad.segment(m * ph * pw + (i + p.top) * pw + p.left, w);
                                 }
                               }
                             });
}

Tensor avg_pool2d(const Tensor& input, Index window, Index stride) {
  require_rank(input, 4, "avg_pool2d");
  if (window < 1 || stride < 1) throw ConfigError("avg_pool2d: window and stride must be >= 1");
  const Index nc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  if (window > h || window > w) {
    throw ConfigError("avg_pool2d: window " + std::to_string(window) + " exceeds input " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  const Index oh = conv_output_size(h, window, stride, 0);
  const Index ow = conv_output_size(w, window, stride, 0);
  const double scale = 1.0 / static_cast<double>(window * window);
  const Array& x = input.value();
  Array out(nc * oh * ow);
  for (Index m = 0; m < nc; ++m) {
    const double* src = x.data() + m * h * w;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (Index a = 0; a < window; ++a) {
          for (Index b = 0; b < window; ++b) acc += src[(i * stride + a) * w + j * stride + b];
        }
        out(m * oh * ow + i * ow + j) = acc * scale;
      }
    }
  }
  return detail::make_result(
      {input.dim(0), input.dim(1), oh, ow}, std::move(out), {input},
      [=](Node& self) {
        Array& gin = self.inputs[0]->grad_buffer();
        for (Index m = 0; m < nc; ++m) {
          double* dst = gin.data() + m * h * w;
          for (Index i = 0; i < oh; ++i) {
            for (Index j = 0; j < ow; ++j) {
              const double gv = self.grad(m * oh * ow + i * ow + j) * scale;
              for (Index a = 0; a < window; ++a) {
                for (Index b = 0; b < window; ++b) dst[(i * stride + a) * w + j * stride + b] += gv;
              }
            }
          }
        }
      });
}

Tensor eltwise(const Tensor& a, const Tensor& b, EltwiseMode mode) {
  if (a.shape() != b.shape()) {
    throw ConfigError("eltwise: shape mismatch " + to_string(a.shape()) + " vs " +
                      to_string(b.shape()));
  }
  if (mode == EltwiseMode::Add) {
    return detail::make_result(a.shape(), a.value() + b.value(), {a, b}, [](Node& self) {
      if (wants_grad(self, 0)) self.inputs[0]->grad_buffer() += self.grad;
      if (wants_grad(self, 1)) self.inputs[1]->grad_buffer() += self.grad;
    });
  }
  return detail::make_result(a.shape(), a.value() * b.value(), {a, b}, [](Node& self) {
    if (wants_grad(self, 0)) self.inputs[0]->grad_buffer() += self.grad * self.inputs[1]->value;
    if (wants_grad(self, 1)) self.inputs[1]->grad_buffer() += self.grad * self.inputs[0]->value;
  });
}

Tensor leaky_relu(const Tensor& input, double slope) {
  const Array& x = input.value();
  Array out = (x >= 0.0).select(x, slope * x);
  return detail::make_result(input.shape(), std::move(out), {input}, [slope](Node& self) {
    const Array& x = self.inputs[0]->value;
    self.inputs[0]->grad_buffer() += (x >= 0.0).select(self.grad, slope * self.grad);
  });
}

Tensor relu(const Tensor& input) {
  Array out = input.value().max(0.0);
  return detail::make_result(input.shape(), std::move(out), {input}, [](Node& self) {
    const Array& x = self.inputs[0]->value;
    self.inputs[0]->grad_buffer() += (x > 0.0).cast<double>() * self.grad;
  });
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  const Index n = input.dim(0), d = input.dim(1), u = weights.dim(1);
  if (weights.dim(0) != d) {
    throw ConfigError("dense: input width " + std::to_string(d) + " != weight rows " +
                      std::to_string(weights.dim(0)));
  }
  if (bias.rank() != 1 || bias.dim(0) != u) {
    throw ConfigError("dense: bias must have shape [" + std::to_string(u) + "]");
  }
  Array out(n * u);
  MatrixMap y(out.data(), n, u);
  y.noalias() = ConstMatrixMap(input.value().data(), n, d) * ConstMatrixMap(weights.value().data(), d, u);
  y.rowwise() += bias.value().matrix().transpose();
  return detail::make_result({n, u}, std::move(out), {input, weights, bias}, [n, d, u](Node& self) {
    ConstMatrixMap gy(self.grad.data(), n, u);
    if (wants_grad(self, 0)) {
      MatrixMap gx(self.inputs[0]->grad_buffer().data(), n, d);
      gx.noalias() += gy * ConstMatrixMap(self.inputs[1]->value.data(), d, u).transpose();
    }
    if (wants_grad(self, 1)) {
      MatrixMap gw(self.inputs[1]->grad_buffer().data(), d, u);
      gw.noalias() += ConstMatrixMap(self.inputs[0]->value.data(), n, d).transpose() * gy;
    }
    if (wants_grad(self, 2)) {
      self.inputs[2]->grad_buffer() += gy.colwise().sum().transpose().array();
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const Index n = logits.dim(0), c = logits.dim(1);
  if (static_cast<Index>(labels.size()) != n) {
    throw DataError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                    std::to_string(n));
  }
  ConstMatrixMap z(logits.value().data(), n, c);
  MatrixR probs(n, c);
  double loss = 0.0;
  std::vector<int> targets(labels.begin(), labels.end());
  for (Index i = 0; i < n; ++i) {
    const int label = targets[static_cast<std::size_t>(i)];
    if (label < 0 || label >= c) {
      throw DataError("label " + std::to_string(label) + " out of range [0, " + std::to_string(c) + ")");
    }
    const double zmax = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - zmax).eval();
    const double log_norm = std::log(shifted.exp().sum());
    probs.row(i) = (shifted - log_norm).exp().matrix();
    loss -= shifted(label) - log_norm;
  }
  loss /= static_cast<double>(n);
  return detail::make_result(
      {1}, Array::Constant(1, loss), {logits},
      [n, c, probs = std::move(probs), targets = std::move(targets)](Node& self) {
        MatrixMap g(self.inputs[0]->grad_buffer().data(), n, c);
        const double scale = self.grad(0) / static_cast<double>(n);
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < c; ++j) {
            const double onehot = j == targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
            g(i, j) += (probs(i, j) - onehot) * scale;
          }
        }
      });
}

Tensor dropout(const Tensor& input, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return input;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  Array mask(input.numel());
  for (Index i = 0; i < mask.size(); ++i) mask(i) = uniform(rng) < rate ? 0.0 : keep_scale;
  Array out = input.value() * mask;
  return detail::make_result(input.shape(), std::move(out), {input},
                             [mask = std::move(mask)](Node& self) {
                               self.inputs[0]->grad_buffer() += self.grad * mask;
                             });
}

Tensor permute_axis(const Tensor& input, std::size_t axis, const std::vector<Index>& order) {
  if (axis >= input.rank()) throw ConfigError("permute_axis: axis out of range");
  const Index extent = input.dim(axis);
  if (static_cast<Index>(order.size()) != extent) throw ConfigError("permute_axis: order has wrong length");
  std::vector<bool> seen(order.size(), false);
  for (Index o : order) {
    if (o < 0 || o >= extent || seen[static_cast<std::size_t>(o)]) {
      throw ConfigError("permute_axis: order is not a permutation");
    }
    seen[static_cast<std::size_t>(o)] = true;
  }
  Index outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= input.dim(a);
  for (std::size_t a = axis + 1; a < input.rank(); ++a) inner *= input.dim(a);
  const Array& x = input.value();
  Array out(x.size());
  for (Index o = 0; o < outer; ++o) {
    for (Index i = 0; i < extent; ++i) {
      out.segment((o * extent + i) * inner, inner) = x.segment((o * extent + order[static_cast<std::size_t>(i)]) * inner, inner);
    }
  }
  return detail::make_result(input.shape(), std::move(out), {input}, [outer, extent, inner, order](Node& self) {
    Array& gin = self.inputs[0]->grad_buffer();
    for (Index o = 0; o < outer; ++o) {
      for (Index i = 0; i < extent; ++i) {
        gin.segment((o * extent + order[static_cast<std::size_t>(i)]) * inner, inner) +=
            self.grad.segment((o * extent + i) * inner, inner);
      }
    }
  });
}

Tensor sum(const Tensor& input) {
  return detail::make_result({1}, Array::Constant(1, input.value().sum()), {input}, [](Node& self) {
    self.inputs[0]->grad_buffer() += self.grad(0);
  });
}

Tensor flatten(const Tensor& input) {
  if (input.rank() < 2) return input.reshape({input.dim(0), 1});
  return input.reshape({input.dim(0), input.numel() / input.dim(0)});
}

}  // namespace nf

#include "neurofuzzy/tsk_reference.hpp"

#include "neurofuzzy/errors.hpp"

#include <cmath>
#include <string>

namespace nf::reference {

namespace {

double leaky(double v) { return v >= 0.0 ? v : kFuzzyLeakySlope * v; }

double clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

std::vector<double> copy_values(const Tensor& t) {
  return std::vector<double>(t.value().data(), t.value().data() + t.numel());
}

std::size_t idx(Index i) { return static_cast<std::size_t>(i); }

void check_image(const Image& image, const NaiveFuzzyLayerSpec& spec) {
  if (image.channels != spec.channels) throw ConfigError("reference: channel mismatch");
  if (spec.kernel > image.height || spec.kernel > image.width) {
    throw ConfigError("reference: fuzzy set larger than image");
  }
  if ((image.height - spec.kernel) / spec.stride + 1 != spec.rows ||
      (image.width - spec.kernel) / spec.stride + 1 != spec.cols) {
    throw ConfigError("reference: subregion grid does not match image size");
  }
}

// Dot product of one subregion with a [C][s][s] filter block.
double window_dot(const Image& image, const std::vector<double>& filters, Index filter, Index top,
                  Index left, Index kernel) {
  double acc = 0.0;
  for (Index c = 0; c < image.channels; ++c) {
    for (Index u = 0; u < kernel; ++u) {
      for (Index v = 0; v < kernel; ++v) {
        const Index w = ((filter * image.channels + c) * kernel + u) * kernel + v;
        acc += image.at(c, top + u, left + v) * filters[idx(w)];
      }
    }
  }
  return acc;
}

}  // namespace

double GaussianMembership::operator()(double x) const {
  const double d = (x - center) / width;
  return std::exp(-0.5 * d * d);
}

double TskRule::strength(std::span<const double> x) const {
  double p = 1.0;
  for (std::size_t i = 0; i < premises.size(); ++i) p *= premises[i](x[i]);
  return p;
}

double TskRule::consequent(std::span<const double> x) const {
  double y = intercept;
  for (std::size_t i = 0; i < coeffs.size(); ++i) y += coeffs[i] * x[i];
  return y;
}

void TskRuleSet::validate(std::size_t input_dim) const {
  if (rules.empty()) throw ConfigError("tsk: rule set is empty");
  for (const TskRule& r : rules) {
    if (r.premises.size() != input_dim || r.coeffs.size() != input_dim) {
      throw ConfigError("tsk: rule dimension does not match input dimension " + std::to_string(input_dim));
    }
    for (const GaussianMembership& m : r.premises) {
      if (!(m.width > 0.0)) throw ConfigError("tsk: membership widths must be positive");
    }
  }
}

double tsk_combine(std::span<const double> strengths, std::span<const double> outputs) {
  if (strengths.size() != outputs.size() || strengths.empty()) {
    throw ConfigError("tsk: strengths and outputs must be non-empty and of equal length");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < strengths.size(); ++k) {
    num += strengths[k] * outputs[k];
    den += strengths[k];
  }
  if (den == 0.0) throw DataError("tsk: every rule has zero firing strength");
  return num / den;
}

double tsk_eval(const TskRuleSet& rules, std::span<const double> x) {
  rules.validate(x.size());
  std::vector<double> p, f;
  for (const TskRule& r : rules.rules) {
    p.push_back(r.strength(x));
    f.push_back(r.consequent(x));
  }
  return tsk_combine(p, f);
}

Image Image::from_tensor(const Tensor& batch, Index n) {
  if (batch.rank() != 4 || n < 0 || n >= batch.dim(0)) throw ConfigError("reference: expected N x C x H x W tensor");
  Image img{batch.dim(1), batch.dim(2), batch.dim(3), {}};
  const Index size = img.channels * img.height * img.width;
  img.data.assign(batch.value().data() + n * size, batch.value().data() + (n + 1) * size);
  return img;
}

NaiveFuzzyLayerSpec NaiveFuzzyLayerSpec::from_params(const FuzzyLayerParams& params, Index height,
                                                     Index width) {
  params.validate();
  NaiveFuzzyLayerSpec s;
  s.kind = params.kind;
  s.rules = params.rules;
  s.outputs = params.outputs;
  s.channels = params.channels;
  s.kernel = params.kernel;
  s.stride = params.stride;
  s.rule_filters = copy_values(params.rule_filters);
  s.mix_filters = copy_values(params.mix_filters);
  s.mix_bias = copy_values(params.mix_bias);
  s.out_filters = copy_values(params.out_filters);
  s.out_bias = copy_values(params.out_bias);
  if (s.kernel > height || s.kernel > width) throw ConfigError("reference: fuzzy set larger than image");
  for (Index top = 0; top + s.kernel <= height; top += s.stride) {
    ++s.rows;
    for (Index left = 0; left + s.kernel <= width; left += s.stride) s.subregions.emplace_back(top, left);
  }
  s.cols = static_cast<Index>(s.subregions.size()) / s.rows;
  return s;
}

std::vector<double> membership_grades(const Image& image, const NaiveFuzzyLayerSpec& spec) {
  check_image(image, spec);
  const Index cells = static_cast<Index>(spec.subregions.size());
  std::vector<double> grades(idx(spec.rules * cells));
  for (Index k = 0; k < spec.rules; ++k) {
    for (Index i = 0; i < cells; ++i) {
      const auto [top, left] = spec.subregions[idx(i)];
      grades[idx(k * cells + i)] = clip01(window_dot(image, spec.rule_filters, k, top, left, spec.kernel));
    }
  }
  return grades;
}

std::vector<double> firing_strengths(const Image& image, const NaiveFuzzyLayerSpec& spec) {
  std::vector<double> p = membership_grades(image, spec);
  const Index cells = static_cast<Index>(spec.subregions.size());
  for (Index i = 0; i < cells; ++i) {
    double total = 0.0;
    for (Index k = 0; k < spec.rules; ++k) total += p[idx(k * cells + i)];
    for (Index k = 0; k < spec.rules; ++k) p[idx(k * cells + i)] /= total + kFiringEpsilon;
  }
  return p;
}

Image fio_reference(const Image& image, const NaiveFuzzyLayerSpec& spec) {
  if (spec.kind != LayerKind::FIO || spec.stride != 1) throw ConfigError("fio_reference: needs fio spec");
  const std::vector<double> firing = firing_strengths(image, spec);
  const Index s = spec.kernel, H = image.height, W = image.width;
  const Index cells = spec.rows * spec.cols;
  const Index lead = (s - 1) / 2;  // "same" padding of the consequent, floor side first

  Image out{spec.outputs, H, W, std::vector<double>(idx(spec.outputs * H * W))};
  for (Index o = 0; o < spec.outputs; ++o) {
    // Mixed firing strength of one subregion for output o. Subregions that
    // fall outside the grid are the zero padding of the firing map.
    auto mixed = [&](Index top, Index left) {
      double v = spec.mix_bias[idx(o)];
      if (top >= 0 && top < spec.rows && left >= 0 && left < spec.cols) {
        for (Index k = 0; k < spec.rules; ++k) {
          v += spec.mix_filters[idx(o * spec.rules + k)] * firing[idx(k * cells + top * spec.cols + left)];
        }
      }
      return leaky(v);
    };
    for (Index y = 0; y < H; ++y) {
      for (Index x = 0; x < W; ++x) {
        // g: mean over the s*s subregions whose window would cover (y, x).
        double g = 0.0;
        for (Index top = y - s + 1; top <= y; ++top) {
          for (Index left = x - s + 1; left <= x; ++left) g += mixed(top, left);
        }
        g /= static_cast<double>(s * s);

        double f = spec.out_bias[idx(o)];
        for (Index c = 0; c < spec.channels; ++c) {
          for (Index u = 0; u < s; ++u) {
            for (Index v = 0; v < s; ++v) {
              const Index yy = y + u - lead, xx = x + v - lead;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              f += spec.out_filters[idx(((o * spec.channels + c) * s + u) * s + v)] * image.at(c, yy, xx);
            }
          }
        }
        out.at(o, y, x) = g * leaky(f);
      }
    }
  }
  return out;
}

Image fpo_reference(const Image& image, const NaiveFuzzyLayerSpec& spec) {
  if (spec.kind != LayerKind::FPO) throw ConfigError("fpo_reference: needs fpo spec");
  const std::vector<double> firing = firing_strengths(image, spec);
  const Index cells = spec.rows * spec.cols;
  Image out{spec.outputs, spec.rows, spec.cols, std::vector<double>(idx(spec.outputs * cells))};
  for (Index o = 0; o < spec.outputs; ++o) {
    for (Index i = 0; i < cells; ++i) {
      double g = spec.mix_bias[idx(o)];
      for (Index k = 0; k < spec.rules; ++k) {
        g += spec.mix_filters[idx(o * spec.rules + k)] * firing[idx(k * cells + i)];
      }
      const auto [top, left] = spec.subregions[idx(i)];
      const double f = spec.out_bias[idx(o)] + window_dot(image, spec.out_filters, o, top, left, spec.kernel);
      out.data[idx(o * cells + i)] = leaky(g) * leaky(f);
    }
  }
  return out;
}

}  // namespace nf::reference

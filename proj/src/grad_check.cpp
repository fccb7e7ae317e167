#include "neurofuzzy/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nf {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& p : params) worst = std::max(worst, p.max_rel_error);
  return worst;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad(true);
    t.zero_grad();
  }
  loss_fn().backward();

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  const double h = options.perturbation;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    const Array analytic = t.has_grad() ? t.grad() : Array::Zero(t.numel());

    std::vector<Index> coords(static_cast<std::size_t>(t.numel()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (t.numel() > options.samples_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(options.samples_per_param));
      std::sort(coords.begin(), coords.end());
    }

    ParamGradError err{p.name, static_cast<Index>(coords.size()), 0.0, 0.0};
    NoGradGuard no_grad;
    for (Index i : coords) {
      const double original = t[i];
      t[i] = original + h;
      const double plus = loss_fn().item();
      t[i] = original - h;
      const double minus = loss_fn().item();
      t[i] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      err.max_rel_error = std::max(err.max_rel_error, relative_error(analytic(i), numeric, options.denominator_floor));
      err.max_abs_error = std::max(err.max_abs_error, std::abs(analytic(i) - numeric));
    }
    report.params.push_back(err);
  }
  return report;
}

}  // namespace nf

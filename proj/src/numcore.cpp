#include "parasent/numcore.hpp"

#include <algorithm>
#include <numeric>

namespace parasent {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const Objective& f, ParameterSet<double>& params,
                               const GradCheckOptions& opts,
                               const Gradients<double>* analytic_override) {
  if (!(opts.epsilon > 0.0)) throw std::invalid_argument("gradient_check: epsilon must be > 0");

  Gradients<double> analytic = params.zero_gradients();
  const double base = f(params, &analytic);
  if (!std::isfinite(base)) throw std::runtime_error("gradient_check: non-finite loss");
  if (analytic_override) analytic = *analytic_override;

  GradCheckResult result;
  Rng rng(opts.seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p];
    std::vector<std::size_t> coords(w.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opts.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t k : coords) {
      const double saved = w[k];
      w[k] = saved + opts.epsilon;
      const double up = f(params, nullptr);
      w[k] = saved - opts.epsilon;
      const double down = f(params, nullptr);
      w[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw std::runtime_error("gradient_check: non-finite loss at " + params.name(p));
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double err = relative_error(analytic[p][k], numeric);
      ++result.coordinates_checked;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = std::max(result.max_relative_error, err);
        if (err >= result.max_relative_error) {
          result.worst_parameter = params.name(p);
          result.worst_index = k;
          result.worst_analytic = analytic[p][k];
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace parasent

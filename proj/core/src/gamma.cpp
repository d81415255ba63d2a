#include "gazeid/gamma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "gazeid/errors.hpp"

namespace gazeid {

namespace {

constexpr double kShapeLo = 1e-3;
constexpr double kShapeHi = 1e3;

}  // namespace

double log_gamma_fn(double x) { return boost::math::lgamma(x); }
double digamma_fn(double x) { return boost::math::digamma(x); }
double trigamma_fn(double x) { return boost::math::trigamma(x); }

void require_valid(const GammaNatural& params) {
  if (!params.valid()) {
    throw DomainError("gamma natural parameters need eta1 > -1 and eta2 < 0 (got " +
                      std::to_string(params.eta1) + ", " +
                      std::to_string(params.eta2) + ")");
  }
}

double log_partition(const GammaNatural& params) {
  require_valid(params);
  const double shape = params.eta1 + 1.0;
  return log_gamma_fn(shape) - shape * std::log(-params.eta2);
}

double log_density(const GammaNatural& params, double x) {
  if (!(x > 0.0)) throw DomainError("gamma density is defined for x > 0 only");
  return params.eta1 * std::log(x) + params.eta2 * x - log_partition(params);
}

ShapeRate to_shape_rate(const GammaNatural& params) {
  require_valid(params);
  return {params.eta1 + 1.0, -params.eta2};
}

GammaNatural from_shape_rate(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw DomainError("gamma shape and rate must be positive and finite");
  }
  return {shape - 1.0, -rate};
}

GammaNatural fit_mle(std::span<const double> samples) {
  if (samples.size() < 2) throw FitError("gamma fit needs at least two samples");
  double sum = 0.0;
  double sum_log = 0.0;
  for (double x : samples) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw FitError("gamma fit needs positive finite samples");
    }
    sum += x;
    sum_log += std::log(x);
  }
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  if (*lo_it == *hi_it) throw FitError("gamma fit is degenerate: all samples equal");

  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  // Profile likelihood in the shape k: log k - digamma(k) = log(mean) - mean(log x).
  const double s = std::log(mean) - sum_log / n;
  auto score = [s](double k) { return std::log(k) - digamma_fn(k) - s; };

  double lo = kShapeLo;
  double hi = kShapeHi;
  if (!(score(lo) > 0.0) || !(score(hi) < 0.0)) {
    throw FitError("gamma shape estimate outside [1e-3, 1e3]");
  }
  // Bisection on log k (score is decreasing), then Newton polish.
  for (int i = 0; i < 200 && hi / lo > 1.0 + 1e-6; ++i) {
    const double mid = std::sqrt(lo * hi);
    (score(mid) > 0.0 ? lo : hi) = mid;
  }
  double k = std::sqrt(lo * hi);
  for (int i = 0; i < 50; ++i) {
    const double f = score(k);
    if (std::abs(f) < 1e-12) break;
    const double df = 1.0 / k - trigamma_fn(k);
    const double next = k - f / df;
    if (!(next > 0.0) || !std::isfinite(next)) break;
    k = next;
  }
  if (!(std::abs(score(k)) < 1e-8)) throw FitError("gamma shape iteration did not converge");
  return from_shape_rate(k, k / mean);
}

std::vector<double> sample(const GammaNatural& params, std::size_t count,
                           RngStream& rng) {
  const ShapeRate sr = to_shape_rate(params);
  std::gamma_distribution<double> dist(sr.shape, 1.0 / sr.rate);
  std::vector<double> out(count);
  for (double& x : out) {
    do {
      x = dist(rng);
    } while (!(x > 0.0));
  }
  return out;
}

}  // namespace gazeid

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gazeid/rng.hpp"

namespace gazeid {

/// Gamma distribution in exponential-family form,
/// p(x) = exp(eta1 * log x + eta2 * x) / Z(eta).
struct GammaNatural {
  double eta1 = 0.0;  // coefficient of log x (shape - 1)
  double eta2 = -1.0; // coefficient of x (-rate)

  bool valid() const { return eta1 > -1.0 && eta2 < 0.0; }
  bool operator==(const GammaNatural&) const = default;
};

struct ShapeRate {
  double shape = 1.0;
  double rate = 1.0;
};

/// Throws DomainError unless eta1 > -1 and eta2 < 0.
void require_valid(const GammaNatural& params);

/// log Z(eta) = lgamma(eta1 + 1) - (eta1 + 1) log(-eta2).
double log_partition(const GammaNatural& params);

double log_density(const GammaNatural& params, double x);

ShapeRate to_shape_rate(const GammaNatural& params);
GammaNatural from_shape_rate(double shape, double rate);

/// Maximum-likelihood fit. Requires at least two positive samples that are
/// not all equal; otherwise throws FitError.
GammaNatural fit_mle(std::span<const double> samples);

std::vector<double> sample(const GammaNatural& params, std::size_t count,
                           RngStream& rng);

/// Special functions used by the gamma family.
double log_gamma_fn(double x);
double digamma_fn(double x);
double trigamma_fn(double x);

}  // namespace gazeid

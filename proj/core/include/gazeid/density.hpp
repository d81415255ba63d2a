#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gazeid/gamma.hpp"
#include "gazeid/gp.hpp"
#include "gazeid/rng.hpp"

namespace gazeid {

/// Lower floor for grid supports; keeps log x finite.
inline constexpr double kGridFloor = 1e-6;
inline constexpr std::size_t kDefaultQuadratureCount = 512;
inline constexpr double kDefaultExtensionFactor = 1.5;

/// Points at which a latent function is represented: the training observations
/// of one density plus equally spaced quadrature nodes over [low, high].
class SupportGrid {
 public:
  /// `observations` need not be sorted or unique. Throws DomainError unless
  /// 0 <= low < high, count >= 2 and every observation lies in [low, high].
  SupportGrid(std::vector<double> observations, double low, double high,
              std::size_t quadrature_count);

  double low() const { return low_; }
  double high() const { return high_; }
  double spacing() const { return spacing_; }
  std::size_t quadrature_count() const { return quadrature_.size(); }

  std::span<const double> observation_points() const { return observations_; }
  std::span<const double> quadrature_points() const { return quadrature_; }
  /// Union of observation and quadrature points, sorted and unique.
  std::span<const double> points() const { return points_; }
  /// Position of each quadrature node inside points().
  std::span<const std::size_t> quadrature_index() const { return quadrature_index_; }

  /// Index of `x` in points() if it is a represented point.
  std::optional<std::size_t> find_point(double x) const;

  bool same_layout(const SupportGrid& other) const;

 private:
  double low_;
  double high_;
  double spacing_;
  std::vector<double> observations_;
  std::vector<double> quadrature_;
  std::vector<double> points_;
  std::vector<std::size_t> quadrature_index_;
};

/// Extra range a grid must cover besides the observations themselves
/// (finite truncation bounds of the training data).
struct Coverage {
  double low = 0.0;
  double high = 0.0;
};

/// low = max(kGridFloor, min / ext), high = max * ext, where min/max run over the
/// observations and the optional coverage range.
SupportGrid build_grid(std::span<const double> observations,
                       std::size_t quadrature_count = kDefaultQuadratureCount,
                       double extension_factor = kDefaultExtensionFactor,
                       std::optional<Coverage> coverage = std::nullopt);

/// eta1 * log x + eta2 * x, with 0 * log 0 taken as 0.
double exponent(const GammaNatural& eta, double x);

/// Linear interpolation of a represented function; constant beyond the ends.
double interpolate(std::span<const double> points, std::span<const double> values,
                   double x);

/// Trapezoid estimate of log of the integral of exp(eta.u(x) + g(x)) over the
/// quadrature nodes, computed with log-sum-exp. `g_values` are aligned with
/// grid.points(). Throws NumericalError on non-finite integrands.
double log_normalizer(const GammaNatural& eta, std::span<const double> g_values,
                      const SupportGrid& grid);

/// f(x) = exp(eta.u(x) + g(x)) / Z on a support grid.
class SemiparametricDensity {
 public:
  SemiparametricDensity(std::shared_ptr<const SupportGrid> grid, GammaNatural eta,
                        std::vector<double> g_values);

  /// Pure gamma on the grid (g identically zero).
  static SemiparametricDensity gamma_on_grid(std::shared_ptr<const SupportGrid> grid,
                                             GammaNatural eta);

  const GammaNatural& eta() const { return eta_; }
  std::span<const double> g_values() const { return g_; }
  LatentFunction latent() const;
  const SupportGrid& grid() const { return *grid_; }
  const std::shared_ptr<const SupportGrid>& grid_ptr() const { return grid_; }
  double log_normalizer() const { return log_z_; }

  /// g at x: exact at represented points, linear in between, constant outside.
  double latent_at(double x) const;
  double log_pdf(double x) const;
  /// log_pdf at points()[index], no interpolation.
  double log_pdf_at(std::size_t index, double x) const;

  /// Mass of [l, r] under the piecewise-linear interpolant of the density over
  /// the quadrature nodes. Bounds are clipped to [low, high].
  double truncated_mass(double l, double r) const;
  double cdf(double x) const;

  /// log f(x) - log mass(l, r); -inf for x outside [l, r]. Throws
  /// InfeasibleTruncation when the interval has no mass.
  double truncated_log_pdf(double x, double l, double r) const;

  /// Inverse-CDF draw restricted to [l, r]. Throws InfeasibleTruncation on zero mass.
  double sample_truncated(double l, double r, RngStream& rng) const;

  /// Density values at the quadrature nodes.
  std::span<const double> node_density() const { return node_pdf_; }

 private:
  void normalize();
  double prefix_at(double x) const;
  double suffix_at(double x) const;

  std::shared_ptr<const SupportGrid> grid_;
  GammaNatural eta_;
  std::vector<double> g_;
  double log_z_ = 0.0;
  std::vector<double> node_pdf_;
  std::vector<double> prefix_;  // mass of [low, q_k]
  std::vector<double> suffix_;  // mass of [q_k, high]
};

inline double log_pdf(const SemiparametricDensity& f, double x) { return f.log_pdf(x); }
inline double truncated_mass(const SemiparametricDensity& f, double l, double r) {
  return f.truncated_mass(l, r);
}
inline double truncated_log_pdf(const SemiparametricDensity& f, double x, double l,
                                double r) {
  return f.truncated_log_pdf(x, l, r);
}
inline double sample_truncated(const SemiparametricDensity& f, double l, double r,
                               RngStream& rng) {
  return f.sample_truncated(l, r, rng);
}

/// Total-variation distance between two densities given as callables, by
/// trapezoid integration of |p - q| / 2 over [lo, hi].
double total_variation(const std::function<double(double)>& p,
                       const std::function<double(double)>& q, double lo, double hi,
                       std::size_t panels = 20000);

/// TV distance between two grid densities, each taken as zero off its grid.
double total_variation(const SemiparametricDensity& a, const SemiparametricDensity& b,
                       std::size_t panels = 20000);

/// CSV rows "x,log_pdf" over every represented point.
void write_density_csv(std::ostream& out, const SemiparametricDensity& f);

}  // namespace gazeid

#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "gazeid/rng.hpp"

namespace gazeid {

/// Squared-exponential kernel amplitude * exp(-(x - x')^2 / (2 bandwidth^2)),
/// plus `jitter` on the diagonal.
struct CovarianceConfig {
  double amplitude = 1.0;
  double bandwidth = 1.0;
  double jitter = 1e-6;

  /// Default jitter of 1e-6 * amplitude.
  static CovarianceConfig with_default_jitter(double amplitude, double bandwidth);
};

void require_valid(const CovarianceConfig& config);

/// A function represented by its values at strictly increasing points.
struct LatentFunction {
  std::vector<double> points;
  std::vector<double> values;
};

void require_strictly_increasing(std::span<const double> points);

Eigen::MatrixXd covariance_matrix(std::span<const double> points,
                                  const CovarianceConfig& config);

/// Cholesky factor of the covariance over a fixed point set. On failure the
/// jitter is escalated x10 up to 1e-2 * amplitude before giving up.
class GpFactor {
 public:
  GpFactor(std::span<const double> points, const CovarianceConfig& config);

  std::size_t size() const { return static_cast<std::size_t>(lower_.rows()); }
  const Eigen::MatrixXd& lower() const { return lower_; }
  double jitter_used() const { return jitter_used_; }
  double log_determinant() const { return log_det_; }

  /// values = L * whitened
  void color(const Eigen::VectorXd& whitened, Eigen::VectorXd& values) const;
  /// Solves L * whitened = values.
  Eigen::VectorXd whiten(const Eigen::VectorXd& values) const;

  /// MVN log-density given the whitened coordinates of a draw.
  double log_density_whitened(const Eigen::VectorXd& whitened) const;
  double log_density(const Eigen::VectorXd& values) const;

  void draw_whitened(RngStream& rng, Eigen::VectorXd& whitened) const;

 private:
  Eigen::MatrixXd lower_;
  double jitter_used_ = 0.0;
  double log_det_ = 0.0;
};

LatentFunction sample_prior(std::span<const double> points,
                            const CovarianceConfig& config, RngStream& rng);

/// Log-density of g.values under N(0, K(g.points)).
double log_prior(const LatentFunction& g, const CovarianceConfig& config);

/// Mean |x_i - x_j| over all pairs i < j. Exact pairwise loop for n <= 2000,
/// sorted prefix sums beyond. Returns 0 for fewer than two values.
double average_pairwise_distance(std::span<const double> values);
double average_pairwise_distance_bruteforce(std::span<const double> values);
double average_pairwise_distance_sorted(std::span<const double> values);

}  // namespace gazeid

#include "gazeid/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "gazeid/errors.hpp"

namespace gazeid {

CovarianceConfig CovarianceConfig::with_default_jitter(double amplitude,
                                                       double bandwidth) {
  return {amplitude, bandwidth, 1e-6 * amplitude};
}

void require_valid(const CovarianceConfig& config) {
  if (!(config.amplitude > 0.0) || !(config.bandwidth > 0.0) || !(config.jitter > 0.0) ||
      !std::isfinite(config.amplitude) || !std::isfinite(config.bandwidth)) {
    throw DomainError("covariance amplitude, bandwidth and jitter must be positive");
  }
}

void require_strictly_increasing(std::span<const double> points) {
  if (points.empty()) throw DomainError("latent function needs at least one point");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i])) throw DomainError("non-finite support point");
    if (i > 0 && !(points[i - 1] < points[i])) {
      throw DomainError("support points must be strictly increasing");
    }
  }
}

Eigen::MatrixXd covariance_matrix(std::span<const double> points,
                                  const CovarianceConfig& config) {
  require_strictly_increasing(points);
  require_valid(config);
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  const double inv = 1.0 / (2.0 * config.bandwidth * config.bandwidth);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = config.amplitude + config.jitter;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = points[static_cast<std::size_t>(i)] - points[static_cast<std::size_t>(j)];
      const double v = config.amplitude * std::exp(-d * d * inv);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

GpFactor::GpFactor(std::span<const double> points, const CovarianceConfig& config) {
  Eigen::MatrixXd k = covariance_matrix(points, config);
  const double ceiling = 1e-2 * config.amplitude;
  double jitter = config.jitter;
  for (;;) {
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) {
      lower_ = llt.matrixL();
      jitter_used_ = jitter;
      break;
    }
    const double next = jitter * 10.0;
    if (next > ceiling * (1.0 + 1e-12)) {
      throw NumericalError("Cholesky factorization failed even with jitter " +
                           std::to_string(jitter));
    }
    k.diagonal().array() += next - jitter;
    jitter = next;
  }
  log_det_ = 2.0 * lower_.diagonal().array().log().sum();
}

void GpFactor::color(const Eigen::VectorXd& whitened, Eigen::VectorXd& values) const {
  values.noalias() = lower_.triangularView<Eigen::Lower>() * whitened;
}

Eigen::VectorXd GpFactor::whiten(const Eigen::VectorXd& values) const {
  if (values.size() != lower_.rows()) throw DomainError("latent dimension mismatch");
  return lower_.triangularView<Eigen::Lower>().solve(values);
}

double GpFactor::log_density_whitened(const Eigen::VectorXd& whitened) const {
  const double n = static_cast<double>(whitened.size());
  return -0.5 * whitened.squaredNorm() - 0.5 * log_det_ -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

double GpFactor::log_density(const Eigen::VectorXd& values) const {
  return log_density_whitened(whiten(values));
}

void GpFactor::draw_whitened(RngStream& rng, Eigen::VectorXd& whitened) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  whitened.resize(lower_.rows());
  for (Eigen::Index i = 0; i < whitened.size(); ++i) whitened[i] = normal(rng);
}

LatentFunction sample_prior(std::span<const double> points,
                            const CovarianceConfig& config, RngStream& rng) {
  GpFactor factor(points, config);
  Eigen::VectorXd z;
  Eigen::VectorXd v;
  factor.draw_whitened(rng, z);
  factor.color(z, v);
  LatentFunction g;
  g.points.assign(points.begin(), points.end());
  g.values.assign(v.data(), v.data() + v.size());
  return g;
}

double log_prior(const LatentFunction& g, const CovarianceConfig& config) {
  if (g.points.size() != g.values.size()) {
    throw DomainError("latent function has " + std::to_string(g.points.size()) +
                      " points but " + std::to_string(g.values.size()) + " values");
  }
  GpFactor factor(g.points, config);
  const Eigen::Map<const Eigen::VectorXd> v(g.values.data(),
                                            static_cast<Eigen::Index>(g.values.size()));
  return factor.log_density(v);
}

double average_pairwise_distance_bruteforce(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) total += std::abs(values[i] - values[j]);
  }
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double average_pairwise_distance_sorted(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  // sum_{i<j} (v_j - v_i) = sum_j (j * v_j - prefix_j)
  double total = 0.0;
  double prefix = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    total += static_cast<double>(j) * v[j] - prefix;
    prefix += v[j];
  }
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double average_pairwise_distance(std::span<const double> values) {
  return values.size() <= 2000 ? average_pairwise_distance_bruteforce(values)
                               : average_pairwise_distance_sorted(values);
}

}  // namespace gazeid

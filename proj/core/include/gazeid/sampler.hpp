#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gazeid/density.hpp"
#include "gazeid/gamma.hpp"
#include "gazeid/gp.hpp"
#include "gazeid/rng.hpp"

namespace gazeid {

/// Observations of one density with per-observation truncation bounds.
/// Untruncated observations carry l = 0 and r = +inf.
struct TruncatedObservations {
  std::vector<double> y;
  std::vector<double> l;
  std::vector<double> r;

  void add(double value, double left, double right);
  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
  /// Throws DomainError on length mismatch, l >= r, or y outside [l, r].
  void validate() const;
  /// Finite truncation bounds, if any, as a range the grid should cover.
  std::optional<Coverage> finite_bounds() const;
};

/// Prior over gamma natural parameters: flat (improper) on the valid region,
/// optionally restricted to a box.
struct EtaPrior {
  double eta1_min = -1.0;
  double eta1_max = std::numeric_limits<double>::infinity();
  double eta2_min = -std::numeric_limits<double>::infinity();
  double eta2_max = 0.0;

  double log_density(const GammaNatural& eta) const;
};

struct MHConfig {
  std::size_t iterations = 10000;
  std::size_t burn_in = 5000;
  /// Random-walk standard deviation for eta, in units where the data have unit
  /// mean (the eta2 component is scaled by the mean observation).
  double eta_step = 0.05;
  std::size_t thinning = 5;
  std::uint64_t seed = 0;
  /// Tune eta_step during the first half of burn-in toward 23% acceptance.
  bool adapt = true;
  bool keep_latent_samples = true;
  bool record_trace = false;
};

void require_valid(const MHConfig& config);

/// Scale of the eta random walk: eta* = eta + step * (z1, z2 * eta2_scale).
struct EtaProposal {
  double step = 0.05;
  double eta2_scale = 1.0;

  double log_density(const GammaNatural& to, const GammaNatural& from) const;
};

/// One state of the chain. `whitened` are the standard-normal coordinates the
/// latent values were colored from, so g = L * whitened.
struct ChainState {
  GammaNatural eta;
  Eigen::VectorXd whitened;
  Eigen::VectorXd g;
  double log_likelihood = 0.0;
  double log_prior_eta = 0.0;
  double log_prior_g = 0.0;

  double log_posterior() const { return log_prior_eta + log_prior_g + log_likelihood; }
};

/// Precomputed access from observations to grid points for fast likelihoods.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(std::shared_ptr<const SupportGrid> grid,
                      const TruncatedObservations& obs);

  /// Sum of truncated log-densities; -inf if any interval has zero mass or
  /// the integrand is not finite.
  double operator()(const GammaNatural& eta, std::span<const double> g) const;

  const std::shared_ptr<const SupportGrid>& grid() const { return grid_; }

 private:
  struct Item {
    double y;
    double l;
    double r;
    std::ptrdiff_t point;  // index into grid points, or -1 to interpolate
    bool full_support;
  };
  std::shared_ptr<const SupportGrid> grid_;
  std::vector<Item> items_;
};

/// Sum over observations of truncated_log_pdf. Throws InfeasibleTruncation
/// naming the observation index when an interval has no mass.
double truncated_log_likelihood(const SemiparametricDensity& f,
                                const TruncatedObservations& obs);

/// Independence proposal for g from the GP prior, Gaussian random walk for eta.
/// Invalid eta are proposed anyway (the prior rejects them).
ChainState propose(const ChainState& state, const EtaProposal& q, const GpFactor& prior,
                   RngStream& rng);

/// log Q of the Metropolis-Hastings ratio. Computes the full expression
/// including both proposal densities and checks it against the reduced form
/// [log p(eta*) + log L*] - [log p(eta) + log L]; throws NumericalError on mismatch.
double acceptance_log_ratio(const ChainState& current, const ChainState& proposal,
                            const EtaProposal& q, const EtaPrior& prior);

struct PosteriorSample {
  GammaNatural eta;
  std::vector<double> g;  // empty unless latent samples are kept
};

struct TraceRow {
  std::size_t iteration;
  double eta1;
  double eta2;
  double log_posterior;
  bool accepted;
};

struct DensityPosterior {
  std::vector<PosteriorSample> samples;
  SemiparametricDensity mean_density;
  double acceptance_rate = 0.0;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  double final_eta_step = 0.0;
  std::vector<TraceRow> trace;
};

/// Default eta when no maximum-likelihood fit exists: shape 2 with the rate
/// matched to the mean observation (or the grid midpoint without observations).
GammaNatural fallback_eta(std::span<const double> y, const SupportGrid& grid);

/// Runs one Metropolis-Hastings chain over (eta, g), initialized at the
/// maximum-likelihood gamma fit with g = 0.
DensityPosterior run_chain(const TruncatedObservations& obs,
                           std::shared_ptr<const SupportGrid> grid,
                           const CovarianceConfig& covariance, const MHConfig& config,
                           const EtaPrior& prior = {});

/// Component-wise mean of eta and g over samples sharing `grid`.
SemiparametricDensity posterior_mean(std::span<const PosteriorSample> samples,
                                     std::shared_ptr<const SupportGrid> grid);

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace);

}  // namespace gazeid

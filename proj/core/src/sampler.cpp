#include "gazeid/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "gazeid/errors.hpp"

namespace gazeid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454836;

constexpr std::size_t kAdaptWindow = 100;
constexpr double kTargetLow = 0.18;
constexpr double kTargetHigh = 0.28;
constexpr double kMinStep = 1e-6;
constexpr double kMaxStep = 10.0;

double mean_of(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v;
  return y.empty() ? 0.0 : s / static_cast<double>(y.size());
}

double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLogTwoPi;
}

}  // namespace

void TruncatedObservations::add(double value, double left, double right) {
  y.push_back(value);
  l.push_back(left);
  r.push_back(right);
}

void TruncatedObservations::validate() const {
  if (l.size() != y.size() || r.size() != y.size()) {
    throw DomainError("truncated observations have mismatched lengths");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(l[i] < r[i])) {
      throw DomainError("observation " + std::to_string(i) + " has l >= r");
    }
    if (!(y[i] >= l[i] && y[i] <= r[i]) || !std::isfinite(y[i])) {
      throw DomainError("observation " + std::to_string(i) + " lies outside its interval");
    }
  }
}

std::optional<Coverage> TruncatedObservations::finite_bounds() const {
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (l[i] == 0.0 && r[i] == kInf) continue;
    for (double b : {l[i], r[i]}) {
      if (std::isfinite(b)) {
        lo = std::min(lo, b);
        hi = std::max(hi, b);
      }
    }
  }
  if (lo > hi) return std::nullopt;
  return Coverage{std::max(0.0, lo), hi};
}

double EtaPrior::log_density(const GammaNatural& eta) const {
  if (!eta.valid()) return -kInf;
  if (eta.eta1 < eta1_min || eta.eta1 > eta1_max) return -kInf;
  if (eta.eta2 < eta2_min || eta.eta2 > eta2_max) return -kInf;
  return 0.0;
}

void require_valid(const MHConfig& config) {
  if (config.iterations == 0) throw DomainError("MH iterations must be positive");
  if (!(config.burn_in < config.iterations)) {
    throw DomainError("MH burn_in must be smaller than iterations");
  }
  if (config.thinning < 1) throw DomainError("MH thinning must be >= 1");
  if (!(config.eta_step >= 0.0) || !std::isfinite(config.eta_step)) {
    throw DomainError("MH eta_step must be a non-negative finite number");
  }
}

double EtaProposal::log_density(const GammaNatural& to, const GammaNatural& from) const {
  if (step == 0.0) return to == from ? 0.0 : -kInf;
  return normal_log_density(to.eta1, from.eta1, step) +
         normal_log_density(to.eta2, from.eta2, step * eta2_scale);
}

LikelihoodEvaluator::LikelihoodEvaluator(std::shared_ptr<const SupportGrid> grid,
                                         const TruncatedObservations& obs)
    : grid_(std::move(grid)) {
  if (!grid_) throw DomainError("likelihood needs a support grid");
  obs.validate();
  items_.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto p = grid_->find_point(obs.y[i]);
    items_.push_back({obs.y[i], obs.l[i], obs.r[i],
                      p ? static_cast<std::ptrdiff_t>(*p) : -1,
                      obs.l[i] <= grid_->low() && obs.r[i] >= grid_->high()});
  }
}

double LikelihoodEvaluator::operator()(const GammaNatural& eta,
                                       std::span<const double> g) const {
  if (!eta.valid()) return -kInf;
  std::optional<SemiparametricDensity> f;
  try {
    f.emplace(grid_, eta, std::vector<double>(g.begin(), g.end()));
  } catch (const NumericalError&) {
    return -kInf;
  }
  const double full_mass = f->truncated_mass(grid_->low(), grid_->high());
  double sum = 0.0;
  for (const Item& it : items_) {
    const double mass = it.full_support ? full_mass : f->truncated_mass(it.l, it.r);
    if (!(mass > 0.0)) return -kInf;
    const double lp = it.point >= 0 ? f->log_pdf_at(static_cast<std::size_t>(it.point), it.y)
                                    : f->log_pdf(it.y);
    sum += lp - std::log(mass);
  }
  return std::isnan(sum) ? -kInf : sum;
}

double truncated_log_likelihood(const SemiparametricDensity& f,
                                const TruncatedObservations& obs) {
  obs.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    try {
      sum += f.truncated_log_pdf(obs.y[i], obs.l[i], obs.r[i]);
    } catch (const InfeasibleTruncation& e) {
      throw InfeasibleTruncation("observation " + std::to_string(i) + ": " + e.what());
    }
  }
  return sum;
}

ChainState propose(const ChainState& state, const EtaProposal& q, const GpFactor& prior,
                   RngStream& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ChainState next;
  const double z1 = normal(rng);
  const double z2 = normal(rng);
  next.eta = {state.eta.eta1 + q.step * z1, state.eta.eta2 + q.step * q.eta2_scale * z2};
  prior.draw_whitened(rng, next.whitened);
  prior.color(next.whitened, next.g);
  next.log_prior_g = prior.log_density_whitened(next.whitened);
  return next;
}

double acceptance_log_ratio(const ChainState& current, const ChainState& proposal,
                            const EtaProposal& q, const EtaPrior& prior) {
  const double lp_new = prior.log_density(proposal.eta);
  if (lp_new == -kInf || !std::isfinite(proposal.log_likelihood)) return -kInf;
  const double lp_old = prior.log_density(current.eta);
  if (!std::isfinite(lp_old + current.log_likelihood)) return kInf;

  const double q_back = q.log_density(current.eta, proposal.eta) + current.log_prior_g;
  const double q_fwd = q.log_density(proposal.eta, current.eta) + proposal.log_prior_g;
  const double num = lp_new + proposal.log_prior_g + proposal.log_likelihood;
  const double den = lp_old + current.log_prior_g + current.log_likelihood;
  const double full = (num + q_back) - (den + q_fwd);
  const double reduced = (lp_new + proposal.log_likelihood) - (lp_old + current.log_likelihood);

  const double scale = std::abs(num) + std::abs(den) + std::abs(q_back) + std::abs(q_fwd);
  const double tol = 1e-8 + 64.0 * std::numeric_limits<double>::epsilon() * scale;
  if (!(std::abs(full - reduced) <= tol)) {
    throw NumericalError("acceptance ratio mismatch: full " + std::to_string(full) +
                         " vs reduced " + std::to_string(reduced));
  }
  return full;
}

GammaNatural fallback_eta(std::span<const double> y, const SupportGrid& grid) {
  double m = mean_of(y);
  if (!(m > 0.0)) m = 0.5 * (grid.low() + grid.high());
  return from_shape_rate(2.0, 2.0 / m);
}

DensityPosterior run_chain(const TruncatedObservations& obs,
                           std::shared_ptr<const SupportGrid> grid,
                           const CovarianceConfig& covariance, const MHConfig& config,
                           const EtaPrior& prior) {
  require_valid(config);
  if (obs.empty()) throw DomainError("run_chain needs at least one observation");
  if (!grid) throw DomainError("run_chain needs a support grid");

  const LikelihoodEvaluator likelihood(grid, obs);
  const GpFactor factor(grid->points(), covariance);
  const std::size_t n = grid->points().size();
  RngStream rng(config.seed);

  ChainState state;
  try {
    state.eta = fit_mle(obs.y);
  } catch (const FitError&) {
    state.eta = fallback_eta(obs.y, *grid);
  }
  if (prior.log_density(state.eta) == -kInf) state.eta = fallback_eta(obs.y, *grid);
  state.whitened = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  state.g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  state.log_prior_eta = prior.log_density(state.eta);
  state.log_prior_g = factor.log_density_whitened(state.whitened);
  state.log_likelihood = likelihood(state.eta, std::span<const double>(state.g.data(), n));

  EtaProposal q{config.eta_step, 1.0 / std::max(mean_of(obs.y), 1e-12)};
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::size_t adapt_until = config.adapt ? config.burn_in / 2 : 0;
  std::size_t window_accepted = 0;
  std::size_t accepted = 0;

  std::vector<PosteriorSample> samples;
  std::vector<TraceRow> trace;
  if (config.record_trace) trace.reserve(config.iterations);
  double eta1_sum = 0.0;
  double eta2_sum = 0.0;
  Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  for (std::size_t it = 0; it < config.iterations; ++it) {
    ChainState next = propose(state, q, factor, rng);
    next.log_prior_eta = prior.log_density(next.eta);
    next.log_likelihood = next.log_prior_eta == -kInf
                              ? -kInf
                              : likelihood(next.eta, std::span<const double>(next.g.data(), n));
    const double log_q = acceptance_log_ratio(state, next, q, prior);
    const bool accept = std::log(unif(rng)) < log_q;
    if (accept) {
      state = std::move(next);
      ++accepted;
      ++window_accepted;
    }
    if (config.record_trace) {
      trace.push_back({it, state.eta.eta1, state.eta.eta2, state.log_posterior(), accept});
    }

    if (it < adapt_until && (it + 1) % kAdaptWindow == 0) {
      const double rate = static_cast<double>(window_accepted) / kAdaptWindow;
      if (rate < kTargetLow) q.step *= 0.7;
      if (rate > kTargetHigh) q.step *= 1.4;
      q.step = std::clamp(q.step, std::min(kMinStep, config.eta_step), kMaxStep);
      window_accepted = 0;
    }

    if (it >= config.burn_in && (it - config.burn_in) % config.thinning == 0) {
      PosteriorSample s{state.eta, {}};
      if (config.keep_latent_samples) s.g.assign(state.g.data(), state.g.data() + n);
      samples.push_back(std::move(s));
      eta1_sum += state.eta.eta1;
      eta2_sum += state.eta.eta2;
      g_sum += state.g;
    }
  }

  const double k = static_cast<double>(samples.size());
  const GammaNatural mean_eta{eta1_sum / k, eta2_sum / k};
  g_sum /= k;
  std::vector<double> mean_g(g_sum.data(), g_sum.data() + n);

  return DensityPosterior{
      std::move(samples),
      SemiparametricDensity(grid, mean_eta, std::move(mean_g)),
      static_cast<double>(accepted) / static_cast<double>(config.iterations),
      accepted,
      config.iterations,
      q.step,
      std::move(trace)};
}

SemiparametricDensity posterior_mean(std::span<const PosteriorSample> samples,
                                     std::shared_ptr<const SupportGrid> grid) {
  if (samples.empty()) throw DomainError("posterior_mean needs at least one sample");
  if (!grid) throw DomainError("posterior_mean needs a support grid");
  const std::size_t n = grid->points().size();
  double e1 = 0.0;
  double e2 = 0.0;
  std::vector<double> g(n, 0.0);
  for (const PosteriorSample& s : samples) {
    if (s.g.size() != n) throw DomainError("posterior sample does not match the grid");
    e1 += s.eta.eta1;
    e2 += s.eta.eta2;
    for (std::size_t i = 0; i < n; ++i) g[i] += s.g[i];
  }
  const double k = static_cast<double>(samples.size());
  for (double& v : g) v /= k;
  return SemiparametricDensity(std::move(grid), {e1 / k, e2 / k}, std::move(g));
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "iteration,eta1,eta2,log_posterior,accepted\n";
  char buf[160];
  for (const TraceRow& row : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d\n", row.iteration, row.eta1,
                  row.eta2, row.log_posterior, row.accepted ? 1 : 0);
    out << buf;
  }
}

}  // namespace gazeid

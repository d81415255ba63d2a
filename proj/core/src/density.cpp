#include "gazeid/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "gazeid/errors.hpp"

namespace gazeid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Root t in [0, 1] of a*t^2 + b*t = c, for b >= 0, c >= 0, written to avoid cancellation.
double solve_panel(double a, double b, double c) {
  const double disc = std::max(0.0, b * b + 4.0 * a * c);
  const double denom = b + std::sqrt(disc);
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(2.0 * c / denom, 0.0, 1.0);
}

}  // namespace

SupportGrid::SupportGrid(std::vector<double> observations, double low, double high,
                         std::size_t quadrature_count)
    : low_(low), high_(high), observations_(std::move(observations)) {
  if (!(low >= 0.0) || !(low < high) || !std::isfinite(high)) {
    throw DomainError("support grid needs 0 <= low < high < inf");
  }
  if (quadrature_count < 2) throw DomainError("support grid needs >= 2 quadrature points");
  std::sort(observations_.begin(), observations_.end());
  observations_.erase(std::unique(observations_.begin(), observations_.end()),
                      observations_.end());
  for (double y : observations_) {
    if (!(y >= low && y <= high)) {
      throw DomainError("observation " + std::to_string(y) + " outside grid [" +
                        std::to_string(low) + ", " + std::to_string(high) + "]");
    }
  }
  const std::size_t q = quadrature_count;
  spacing_ = (high - low) / static_cast<double>(q - 1);
  quadrature_.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    quadrature_[i] = low + (high - low) * (static_cast<double>(i) / static_cast<double>(q - 1));
  }
  quadrature_.back() = high;

  points_.reserve(q + observations_.size());
  std::merge(observations_.begin(), observations_.end(), quadrature_.begin(),
             quadrature_.end(), std::back_inserter(points_));
  points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
  quadrature_index_.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    auto it = std::lower_bound(points_.begin(), points_.end(), quadrature_[i]);
    quadrature_index_[i] = static_cast<std::size_t>(it - points_.begin());
  }
}

std::optional<std::size_t> SupportGrid::find_point(double x) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), x);
  if (it != points_.end() && *it == x) return static_cast<std::size_t>(it - points_.begin());
  return std::nullopt;
}

bool SupportGrid::same_layout(const SupportGrid& other) const {
  return low_ == other.low_ && high_ == other.high_ && points_ == other.points_ &&
         quadrature_.size() == other.quadrature_.size();
}

SupportGrid build_grid(std::span<const double> observations, std::size_t quadrature_count,
                       double extension_factor, std::optional<Coverage> coverage) {
  if (observations.empty()) throw DomainError("cannot build a grid without observations");
  if (!(extension_factor >= 1.0)) throw DomainError("extension factor must be >= 1");
  const auto [mn, mx] = std::minmax_element(observations.begin(), observations.end());
  if (!(*mn > 0.0) || !std::isfinite(*mx)) {
    throw DomainError("grid observations must be positive and finite");
  }
  double lo = *mn;
  double hi = *mx;
  if (coverage) {
    lo = std::min(lo, coverage->low);
    hi = std::max(hi, coverage->high);
  }
  const double low = std::max(kGridFloor, lo / extension_factor);
  double high = hi * extension_factor;
  if (!(high > low)) high = low * 2.0;
  return SupportGrid(std::vector<double>(observations.begin(), observations.end()), low,
                     high, quadrature_count);
}

double exponent(const GammaNatural& eta, double x) {
  if (x == 0.0) {
    if (eta.eta1 == 0.0) return 0.0;
    return eta.eta1 > 0.0 ? -kInf : kInf;
  }
  return eta.eta1 * std::log(x) + eta.eta2 * x;
}

double interpolate(std::span<const double> points, std::span<const double> values,
                   double x) {
  if (x <= points.front()) return values.front();
  if (x >= points.back()) return values.back();
  auto it = std::upper_bound(points.begin(), points.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - points.begin());
  const std::size_t lo = hi - 1;
  if (points[lo] == x) return values[lo];
  const double t = (x - points[lo]) / (points[hi] - points[lo]);
  return values[lo] + t * (values[hi] - values[lo]);
}

double log_normalizer(const GammaNatural& eta, std::span<const double> g_values,
                      const SupportGrid& grid) {
  if (g_values.size() != grid.points().size()) {
    throw DomainError("latent values do not match the support grid");
  }
  const auto nodes = grid.quadrature_points();
  const auto index = grid.quadrature_index();
  const std::size_t q = nodes.size();
  double peak = -kInf;
  std::vector<double> phi(q);
  for (std::size_t i = 0; i < q; ++i) {
    phi[i] = exponent(eta, nodes[i]) + g_values[index[i]];
    if (std::isnan(phi[i]) || phi[i] == kInf) {
      throw NumericalError("non-finite integrand at x = " + std::to_string(nodes[i]));
    }
    peak = std::max(peak, phi[i]);
  }
  if (peak == -kInf) throw NumericalError("integrand vanishes on the whole grid");
  double sum = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    const double w = (i == 0 || i + 1 == q) ? 0.5 : 1.0;
    sum += w * std::exp(phi[i] - peak);
  }
  return peak + std::log(sum) + std::log(grid.spacing());
}

SemiparametricDensity::SemiparametricDensity(std::shared_ptr<const SupportGrid> grid,
                                             GammaNatural eta, std::vector<double> g_values)
    : grid_(std::move(grid)), eta_(eta), g_(std::move(g_values)) {
  if (!grid_) throw DomainError("density needs a support grid");
  normalize();
}

SemiparametricDensity SemiparametricDensity::gamma_on_grid(
    std::shared_ptr<const SupportGrid> grid, GammaNatural eta) {
  const std::size_t n = grid->points().size();
  return SemiparametricDensity(std::move(grid), eta, std::vector<double>(n, 0.0));
}

void SemiparametricDensity::normalize() {
  log_z_ = gazeid::log_normalizer(eta_, g_, *grid_);
  const auto nodes = grid_->quadrature_points();
  const auto index = grid_->quadrature_index();
  const std::size_t q = nodes.size();
  const double h = grid_->spacing();
  node_pdf_.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    node_pdf_[i] = std::exp(exponent(eta_, nodes[i]) + g_[index[i]] - log_z_);
  }
  prefix_.assign(q, 0.0);
  suffix_.assign(q, 0.0);
  for (std::size_t i = 1; i < q; ++i) {
    prefix_[i] = prefix_[i - 1] + 0.5 * h * (node_pdf_[i - 1] + node_pdf_[i]);
  }
  for (std::size_t i = q - 1; i-- > 0;) {
    suffix_[i] = suffix_[i + 1] + 0.5 * h * (node_pdf_[i] + node_pdf_[i + 1]);
  }
}

LatentFunction SemiparametricDensity::latent() const {
  const auto pts = grid_->points();
  return {std::vector<double>(pts.begin(), pts.end()), g_};
}

double SemiparametricDensity::latent_at(double x) const {
  return interpolate(grid_->points(), g_, x);
}

double SemiparametricDensity::log_pdf(double x) const {
  if (!(x >= 0.0)) return -kInf;
  return exponent(eta_, x) + latent_at(x) - log_z_;
}

double SemiparametricDensity::log_pdf_at(std::size_t index, double x) const {
  return exponent(eta_, x) + g_[index] - log_z_;
}

namespace {

struct PanelPos {
  std::size_t k;
  double t;
};

PanelPos locate(const SupportGrid& grid, double x) {
  const std::size_t q = grid.quadrature_count();
  const double u = (x - grid.low()) / grid.spacing();
  std::size_t k = u <= 0.0 ? 0 : static_cast<std::size_t>(u);
  if (k > q - 2) k = q - 2;
  const double t = std::clamp((x - grid.quadrature_points()[k]) / grid.spacing(), 0.0, 1.0);
  return {k, t};
}

}  // namespace

double SemiparametricDensity::prefix_at(double x) const {
  const auto [k, t] = locate(*grid_, x);
  const double f0 = node_pdf_[k];
  const double f1 = node_pdf_[k + 1];
  return prefix_[k] + grid_->spacing() * (f0 * t + 0.5 * (f1 - f0) * t * t);
}

double SemiparametricDensity::suffix_at(double x) const {
  const auto [k, t] = locate(*grid_, x);
  const double f0 = node_pdf_[k];
  const double f1 = node_pdf_[k + 1];
  const double w = 1.0 - t;
  return suffix_[k + 1] + grid_->spacing() * (f1 * w - 0.5 * (f1 - f0) * w * w);
}

double SemiparametricDensity::cdf(double x) const {
  if (x <= grid_->low()) return 0.0;
  if (x >= grid_->high()) return prefix_.back();
  return prefix_at(x);
}

double SemiparametricDensity::truncated_mass(double l, double r) const {
  if (std::isnan(l) || std::isnan(r)) throw DomainError("NaN truncation bound");
  const double a = std::max(l, grid_->low());
  const double b = std::min(r, grid_->high());
  if (!(a < b)) return 0.0;
  const double fa = prefix_at(a);
  if (fa <= 0.5) return std::max(0.0, prefix_at(b) - fa);
  return std::max(0.0, suffix_at(a) - suffix_at(b));
}

double SemiparametricDensity::truncated_log_pdf(double x, double l, double r) const {
  if (!(l < r)) throw DomainError("truncation interval needs l < r");
  if (!(x >= l && x <= r)) return -kInf;
  const double mass = truncated_mass(l, r);
  if (!(mass > 0.0)) {
    throw InfeasibleTruncation("interval [" + std::to_string(l) + ", " +
                               std::to_string(r) + "] has no mass on the grid");
  }
  return log_pdf(x) - std::log(mass);
}

double SemiparametricDensity::sample_truncated(double l, double r, RngStream& rng) const {
  const double a = std::max(l, grid_->low());
  const double b = std::min(r, grid_->high());
  const double mass = truncated_mass(l, r);
  if (!(mass > 0.0)) {
    throw InfeasibleTruncation("cannot sample from [" + std::to_string(l) + ", " +
                               std::to_string(r) + "]: no mass");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double m = unif(rng) * mass;
  const auto nodes = grid_->quadrature_points();
  const double h = grid_->spacing();
  double x;
  const double fa = prefix_at(a);
  if (fa <= 0.5) {
    const double target = fa + m;
    auto it = std::upper_bound(prefix_.begin(), prefix_.end(), target);
    std::size_t k = it == prefix_.begin() ? 0 : static_cast<std::size_t>(it - prefix_.begin()) - 1;
    k = std::min(k, nodes.size() - 2);
    const double f0 = node_pdf_[k];
    const double f1 = node_pdf_[k + 1];
    const double t = solve_panel(0.5 * (f1 - f0) * h, f0 * h, std::max(0.0, target - prefix_[k]));
    x = nodes[k] + t * h;
  } else {
    const double target = suffix_at(a) - m;  // mass remaining to the right of x
    // suffix_ is non-increasing; find k with suffix_[k] >= target >= suffix_[k + 1].
    auto it = std::upper_bound(suffix_.begin(), suffix_.end(), target,
                               [](double v, double s) { return v > s; });
    std::size_t k1 = static_cast<std::size_t>(it - suffix_.begin());
    k1 = std::clamp<std::size_t>(k1, 1, nodes.size() - 1);
    const std::size_t k = k1 - 1;
    const double f0 = node_pdf_[k];
    const double f1 = node_pdf_[k + 1];
    const double w =
        solve_panel(-0.5 * (f1 - f0) * h, f1 * h, std::max(0.0, target - suffix_[k + 1]));
    x = nodes[k] + (1.0 - w) * h;
  }
  return std::clamp(x, a, b);
}

double total_variation(const std::function<double(double)>& p,
                       const std::function<double(double)>& q, double lo, double hi,
                       std::size_t panels) {
  if (!(lo < hi) || panels < 1) throw DomainError("total_variation needs lo < hi");
  const double h = (hi - lo) / static_cast<double>(panels);
  double sum = 0.0;
  for (std::size_t i = 0; i <= panels; ++i) {
    const double x = i == panels ? hi : lo + h * static_cast<double>(i);
    const double w = (i == 0 || i == panels) ? 0.5 : 1.0;
    sum += w * std::abs(p(x) - q(x));
  }
  return 0.5 * h * sum;
}

double total_variation(const SemiparametricDensity& a, const SemiparametricDensity& b,
                       std::size_t panels) {
  auto on_grid = [](const SemiparametricDensity& f) {
    return [&f](double x) {
      if (x < f.grid().low() || x > f.grid().high()) return 0.0;
      return std::exp(f.log_pdf(x));
    };
  };
  const double lo = std::min(a.grid().low(), b.grid().low());
  const double hi = std::max(a.grid().high(), b.grid().high());
  return total_variation(on_grid(a), on_grid(b), lo, hi, panels);
}

void write_density_csv(std::ostream& out, const SemiparametricDensity& f) {
  out << "x,log_pdf\n";
  const auto pts = f.grid().points();
  char buf[64];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", pts[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", f.log_pdf_at(i, pts[i]));
    out << buf << '\n';
  }
}

}  // namespace gazeid

#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "gazeid/errors.hpp"
#include "gazeid/sampler.hpp"
#include "oracles.hpp"

using namespace gazeid;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

TruncatedObservations untruncated(const std::vector<double>& ys) {
  TruncatedObservations o;
  for (double y : ys) o.add(y, 0.0, kInf);
  return o;
}

MHConfig short_chain(std::uint64_t seed, std::size_t iterations = 2000) {
  MHConfig c;
  c.iterations = iterations;
  c.burn_in = iterations / 2;
  c.thinning = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("observation validation and coverage") {
  TruncatedObservations o;
  o.add(1.0, 0.5, 2.0);
  o.add(3.0, 0.0, kInf);
  CHECK_NOTHROW(o.validate());
  const auto c = o.finite_bounds();
  REQUIRE(c.has_value());
  CHECK(c->low == 0.5);
  CHECK(c->high == 2.0);
  CHECK_FALSE(untruncated({1, 2}).finite_bounds().has_value());
  o.add(5.0, 0.0, 4.0);
  CHECK_THROWS_AS(o.validate(), DomainError);
  TruncatedObservations bad;
  bad.add(1.0, 2.0, 2.0);
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("truncated log likelihood") {
  std::mt19937_64 rng(12);
  const SemiparametricDensity f = fixtures::random_model("m", rng).density(DensityRole::Alpha2);
  CHECK(truncated_log_likelihood(f, {}) == 0.0);
  CHECK(truncated_log_likelihood(f, untruncated({7.0})) ==
        doctest::Approx(f.log_pdf(7.0)).epsilon(1e-9));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TruncatedObservations o;
  double expected = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double l = 100.0 * u(rng);
    const double r = i % 4 == 0 ? kInf : l + 1.0 + 50.0 * u(rng);
    const double y = l + (std::min(r, 160.0) - l) * u(rng);
    o.add(y, l, r);
    expected += oracle::log_pdf(f, y) - std::log(oracle::truncated_mass(f, l, r));
  }
  CHECK(truncated_log_likelihood(f, o) == doctest::Approx(expected).epsilon(1e-10));
  const LikelihoodEvaluator eval(f.grid_ptr(), o);
  CHECK(eval(f.eta(), f.g_values()) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(eval({-2.0, -1.0}, f.g_values()) == -kInf);
  TruncatedObservations far;
  far.add(500.0, 400.0, 600.0);
  CHECK_THROWS_AS(truncated_log_likelihood(f, far), InfeasibleTruncation);
  CHECK(LikelihoodEvaluator(f.grid_ptr(), far)(f.eta(), f.g_values()) == -kInf);
}

TEST_CASE("proposals") {
  const std::vector<double> pts = {0.5, 1.0, 2.0, 3.5};
  const GpFactor prior(pts, {1.0, 1.0, 1e-6});
  ChainState s;
  s.eta = {1.0, -1.0};
  s.whitened = Eigen::VectorXd::Zero(4);
  s.g = Eigen::VectorXd::Zero(4);
  SUBCASE("zero step keeps eta") {
    RngStream rng(1);
    const ChainState p = propose(s, {0.0, 1.0}, prior, rng);
    CHECK(p.eta == s.eta);
  }
  SUBCASE("determinism") {
    RngStream a(2);
    RngStream b(2);
    const ChainState p = propose(s, {0.1, 2.0}, prior, a);
    const ChainState q = propose(s, {0.1, 2.0}, prior, b);
    CHECK(p.eta == q.eta);
    CHECK(p.g == q.g);
  }
  SUBCASE("latent proposal ignores the current latent state") {
    RngStream rng(3);
    const int n = 10000;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    ChainState cur = s;
    for (int i = 0; i < n; ++i) {
      prior.draw_whitened(rng, cur.whitened);
      prior.color(cur.whitened, cur.g);
      const ChainState p = propose(cur, {0.1, 1.0}, prior, rng);
      sxy += cur.g[2] * p.g[2];
      sxx += cur.g[2] * cur.g[2];
      syy += p.g[2] * p.g[2];
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.02);
  }
}

TEST_CASE("acceptance ratio") {
  std::mt19937_64 rng(4);
  const SemiparametricDensity f = fixtures::gamma_density(2.0, 1.0, kGridFloor, 20.0, 64);
  const GpFactor prior(f.grid().points(), CovarianceConfig::with_default_jitter(0.5, 3.0));
  RngStream stream(9);
  const auto obs = untruncated({0.5, 1.2, 2.0, 4.1});
  const LikelihoodEvaluator like(f.grid_ptr(), obs);
  const EtaProposal q{0.2, 1.0};
  const EtaPrior flat;
  auto fill = [&](ChainState& st) {
    st.log_prior_eta = flat.log_density(st.eta);
    st.log_likelihood = like(st.eta, std::span<const double>(st.g.data(), st.g.size()));
  };
  ChainState cur;
  cur.eta = {1.0, -1.0};
  prior.draw_whitened(stream, cur.whitened);
  prior.color(cur.whitened, cur.g);
  cur.log_prior_g = prior.log_density_whitened(cur.whitened);
  fill(cur);
  CHECK(acceptance_log_ratio(cur, cur, q, flat) == doctest::Approx(0.0));
  for (int i = 0; i < 200; ++i) {
    ChainState next = propose(cur, q, prior, stream);
    fill(next);
    const double r = acceptance_log_ratio(cur, next, q, flat);
    if (next.eta.valid()) {
      CHECK(r == doctest::Approx(next.log_likelihood - cur.log_likelihood).epsilon(1e-9));
    } else {
      CHECK(r == -kInf);
    }
  }
  SUBCASE("prior sampling regime accepts everything") {
    ChainState a = cur;
    ChainState b = propose(cur, {0.0, 1.0}, prior, stream);
    a.log_likelihood = 0.0;
    b.log_likelihood = 0.0;
    CHECK(acceptance_log_ratio(a, b, {0.0, 1.0}, flat) == doctest::Approx(0.0));
  }
}

TEST_CASE("chain on gamma data with a weak latent prior") {
  RngStream rng(31);
  const auto ys = sample(from_shape_rate(2.0, 1.0), 500, rng);
  const auto obs = untruncated(ys);
  auto grid = std::make_shared<const SupportGrid>(build_grid(ys));
  MHConfig c;
  c.seed = 77;
  const DensityPosterior post = run_chain(obs, grid, CovarianceConfig::with_default_jitter(0.01, 1.0), c);
  CHECK(post.samples.size() == 1000);
  CHECK(post.acceptance_rate > 0.0);
  CHECK(post.acceptance_rate < 1.0);
  CHECK(post.acceptance_rate ==
        doctest::Approx(static_cast<double>(post.accepted) / static_cast<double>(post.proposed)));
  const SemiparametricDensity& m = post.mean_density;
  const double tv = total_variation([&](double x) { return std::exp(m.log_pdf(x)); },
                                    [](double x) {
                                      return x <= 0 ? 0.0 : std::exp(oracle::gamma_log_pdf(2, 1, x));
                                    },
                                    0.0, 40.0);
  CHECK(tv < 0.05);
}

TEST_CASE("negligible latent amplitude collapses to the gamma fit") {
  RngStream rng(32);
  const auto ys = sample(from_shape_rate(3.0, 0.5), 1000, rng);
  auto grid = std::make_shared<const SupportGrid>(build_grid(ys));
  MHConfig c;
  c.seed = 5;
  const DensityPosterior post =
      run_chain(untruncated(ys), grid, CovarianceConfig::with_default_jitter(1e-10, 1.0), c);
  const ShapeRate mle = to_shape_rate(fit_mle(ys));
  const ShapeRate mean = to_shape_rate(post.mean_density.eta());
  CHECK(std::abs(mean.shape - mle.shape) < 0.1);
  CHECK(std::abs(mean.rate - mle.rate) < 0.1);
}

TEST_CASE("chains are deterministic") {
  RngStream rng(33);
  const auto ys = sample(from_shape_rate(2.0, 1.0), 50, rng);
  auto grid = std::make_shared<const SupportGrid>(build_grid(ys, 64));
  MHConfig c = short_chain(8);
  c.keep_latent_samples = true;
  c.record_trace = true;
  const auto cov = CovarianceConfig::with_default_jitter(0.5, 1.0);
  const DensityPosterior a = run_chain(untruncated(ys), grid, cov, c);
  const DensityPosterior b = run_chain(untruncated(ys), grid, cov, c);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].eta == b.samples[i].eta);
    CHECK(a.samples[i].g == b.samples[i].g);
  }
  CHECK(a.accepted == b.accepted);
  CHECK(a.trace.size() == c.iterations);
  std::ostringstream out;
  write_trace_csv(out, a.trace);
  CHECK(out.str().rfind("iteration,eta1,eta2,log_posterior,accepted\n", 0) == 0);
  const SemiparametricDensity pm = posterior_mean(a.samples, grid);
  CHECK(pm.eta().eta1 == doctest::Approx(a.mean_density.eta().eta1).epsilon(1e-12));
  for (std::size_t i = 0; i < pm.g_values().size(); i += 5) {
    CHECK(pm.g_values()[i] == doctest::Approx(a.mean_density.g_values()[i]).epsilon(1e-9));
  }
}

TEST_CASE("posterior mean") {
  auto grid = std::make_shared<const SupportGrid>(std::vector<double>{}, 0.0, 10.0, 5);
  const std::vector<double> v = {0.1, -0.3, 0.2, 0.0, 0.5};
  std::vector<double> neg = v;
  for (double& x : neg) x = -x;
  const std::vector<PosteriorSample> same(3, PosteriorSample{{1.0, -2.0}, v});
  const SemiparametricDensity m = posterior_mean(same, grid);
  CHECK(m.eta() == GammaNatural{1.0, -2.0});
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(m.g_values()[i] == doctest::Approx(v[i]));
  const SemiparametricDensity direct(grid, {1.0, -2.0}, v);
  CHECK(m.log_normalizer() == doctest::Approx(direct.log_normalizer()));
  const std::vector<PosteriorSample> opposite = {{{1.0, -2.0}, v}, {{1.0, -2.0}, neg}};
  const SemiparametricDensity cancelled = posterior_mean(opposite, grid);
  for (double g : cancelled.g_values()) CHECK(std::abs(g) < 1e-15);
  CHECK_THROWS_AS(posterior_mean({}, grid), DomainError);
  const std::vector<PosteriorSample> wrong = {{{1.0, -2.0}, {0.0}}};
  CHECK_THROWS_AS(posterior_mean(wrong, grid), DomainError);
}

TEST_CASE("configuration checks") {
  MHConfig c;
  c.burn_in = c.iterations;
  CHECK_THROWS_AS(require_valid(c), DomainError);
  c = MHConfig{};
  c.thinning = 0;
  CHECK_THROWS_AS(require_valid(c), DomainError);
  auto grid = std::make_shared<const SupportGrid>(std::vector<double>{}, 0.0, 10.0, 5);
  CHECK_THROWS_AS(run_chain({}, grid, {1, 1, 1e-6}, MHConfig{}), DomainError);
}

#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "gazeid/density.hpp"
#include "gazeid/errors.hpp"
#include "oracles.hpp"

using namespace gazeid;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

SemiparametricDensity random_density(std::mt19937_64& rng, std::size_t nodes = 512) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double shape = 1.2 + 6.0 * u(rng);
  const double rate = shape / (1.0 + 9.0 * u(rng));
  const double high = 1.5 * (shape + 8.0 * std::sqrt(shape)) / rate;
  std::vector<double> obs;
  for (int i = 0; i < 30; ++i) obs.push_back(high * u(rng) / 1.5);
  auto grid = std::make_shared<const SupportGrid>(obs, kGridFloor, high, nodes);
  std::vector<double> g;
  const double c = high * u(rng);
  const double h = 2.0 * (u(rng) - 0.5);
  for (double x : grid->points()) g.push_back(h * std::exp(-0.5 * std::pow((x - c) / (high / 8), 2)));
  return SemiparametricDensity(grid, from_shape_rate(shape, rate), g);
}

}  // namespace

TEST_CASE("grid construction") {
  const SupportGrid g = build_grid(std::vector<double>{1, 2}, 3, 2.0);
  CHECK(g.low() == 0.5);
  CHECK(g.high() == 4.0);
  REQUIRE(g.quadrature_count() == 3);
  CHECK(g.quadrature_points()[1] == doctest::Approx(2.25));
  CHECK(g.points().size() == 5);
  CHECK(g.find_point(2.0).has_value());
  CHECK_FALSE(g.find_point(2.1).has_value());
  CHECK_THROWS_AS(build_grid(std::vector<double>{}, 3, 2.0), DomainError);
  CHECK_THROWS_AS(SupportGrid({5.0}, 0.0, 4.0, 3), DomainError);
  CHECK_THROWS_AS(SupportGrid({}, 0.0, 4.0, 1), DomainError);
  const SupportGrid c = build_grid(std::vector<double>{1, 2}, 3, 2.0, Coverage{0.1, 10.0});
  CHECK(c.low() == doctest::Approx(0.05));
  CHECK(c.high() == 20.0);
  const SupportGrid floor = build_grid(std::vector<double>{kGridFloor, 1.0}, 3, 1.5);
  CHECK(floor.low() == kGridFloor);
  CHECK_THROWS_AS(build_grid(std::vector<double>{0.0, 1.0}, 3, 1.5), DomainError);
}

TEST_CASE("normalizer") {
  auto grid = std::make_shared<const SupportGrid>(std::vector<double>{}, 0.0, 30.0, 3000);
  const std::vector<double> zero(grid->points().size(), 0.0);
  CHECK(std::abs(log_normalizer({0, -1}, zero, *grid)) < 1e-4);
  std::vector<double> shifted(zero.size(), 2.5);
  CHECK(log_normalizer({0, -1}, shifted, *grid) ==
        doctest::Approx(log_normalizer({0, -1}, zero, *grid) + 2.5).epsilon(1e-13));
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const SemiparametricDensity f = random_density(rng);
    CHECK(f.log_normalizer() == doctest::Approx(oracle::log_normalizer(f)).epsilon(1e-12));
  }
}

TEST_CASE("quadrature refinement") {
  std::mt19937_64 a(7);
  std::mt19937_64 b(7);
  for (int t = 0; t < 10; ++t) {
    const SemiparametricDensity coarse = random_density(a, 512);
    const SemiparametricDensity fine = random_density(b, 5120);
    CHECK(std::abs(coarse.log_normalizer() - fine.log_normalizer()) < 1e-3);
  }
}

TEST_CASE("pointwise evaluation") {
  std::mt19937_64 rng(2);
  const SemiparametricDensity f = random_density(rng);
  const auto pts = f.grid().points();
  for (std::size_t i = 0; i < pts.size(); i += 7) {
    const double x = pts[i];
    CHECK(f.log_pdf(x) == doctest::Approx(f.eta().eta1 * std::log(x) + f.eta().eta2 * x +
                                          f.g_values()[i] - f.log_normalizer())
                              .epsilon(1e-13));
    CHECK(f.log_pdf_at(i, x) == doctest::Approx(f.log_pdf(x)).epsilon(1e-13));
  }
  const double mid = 0.5 * (pts[10] + pts[11]);
  CHECK(f.latent_at(mid) == doctest::Approx(0.5 * (f.g_values()[10] + f.g_values()[11])));
  CHECK(f.latent_at(pts.back() + 100.0) == f.g_values().back());
  CHECK(f.latent_at(-1.0) == f.g_values().front());
  CHECK(f.log_pdf(-1.0) == -kInf);
  for (double x : {0.3, 1.7, 5.5, 12.0}) {
    CHECK(f.log_pdf(x) == doctest::Approx(oracle::log_pdf(f, x)).epsilon(1e-12));
  }
}

TEST_CASE("pure gamma on a wide grid matches the gamma density") {
  const SemiparametricDensity f = fixtures::gamma_density(3.0, 0.5, kGridFloor, 60.0, 4096);
  for (double x = 0.05; x < 60.0; x += 0.37) {
    CHECK(std::abs(f.log_pdf(x) - log_density(from_shape_rate(3.0, 0.5), x)) < 1e-3);
  }
}

TEST_CASE("shift invariance of the latent function") {
  std::mt19937_64 rng(3);
  const SemiparametricDensity f = random_density(rng);
  std::vector<double> g(f.g_values().begin(), f.g_values().end());
  for (double& v : g) v += 3.25;
  const SemiparametricDensity s(f.grid_ptr(), f.eta(), g);
  for (double x : {0.1, 1.0, 2.0, 7.0, 9.5}) {
    CHECK(std::abs(s.log_pdf(x) - f.log_pdf(x)) < 1e-12);
  }
}

TEST_CASE("truncated mass") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const SemiparametricDensity f = random_density(rng);
    const double lo = f.grid().low();
    const double hi = f.grid().high();
    CHECK(f.truncated_mass(lo, hi) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.truncated_mass(0.0, kInf) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.truncated_mass(hi + 1.0, hi + 2.0) == 0.0);
    for (int k = 0; k < 10; ++k) {
      double l = hi * u(rng);
      double m = hi * u(rng);
      double r = hi * u(rng);
      if (l > m) std::swap(l, m);
      if (m > r) std::swap(m, r);
      if (l > m) std::swap(l, m);
      const double whole = f.truncated_mass(l, r);
      CHECK(std::abs(f.truncated_mass(l, m) + f.truncated_mass(m, r) - whole) < 1e-9);
      CHECK(whole == doctest::Approx(oracle::truncated_mass(f, l, r)).epsilon(1e-9));
      CHECK(f.truncated_mass(l, r) >= f.truncated_mass(m, r) - 1e-15);
    }
  }
}

TEST_CASE("truncated log density") {
  const SemiparametricDensity f = fixtures::gamma_density(1.0, 1.0, 0.0, 30.0, 20000);
  const double half = std::log(2.0);
  CHECK(f.truncated_log_pdf(0.3, 0.0, half) == doctest::Approx(f.log_pdf(0.3) + half).epsilon(1e-6));
  CHECK(f.truncated_log_pdf(0.3, f.grid().low(), f.grid().high()) ==
        doctest::Approx(f.log_pdf(0.3)).epsilon(1e-10));
  CHECK(f.truncated_log_pdf(1.0, 0.0, half) == -kInf);
  CHECK_THROWS_AS(f.truncated_log_pdf(40.0, 35.0, 45.0), InfeasibleTruncation);
  CHECK_THROWS_AS(f.truncated_log_pdf(1.0, 2.0, 1.0), DomainError);
}

TEST_CASE("truncated sampling") {
  const SemiparametricDensity f = fixtures::gamma_density(1.0, 1.0, 0.0, 30.0, 20000);
  RngStream rng(10);
  SUBCASE("analytic truncated exponential") {
    const double r = std::log(2.0);
    const double x = std::log(4.0 / 3.0);
    const int n = 100000;
    int below = 0;
    for (int i = 0; i < n; ++i) {
      const double s = f.sample_truncated(0.0, r, rng);
      REQUIRE(s >= 0.0);
      REQUIRE(s <= r);
      below += s <= x ? 1 : 0;
    }
    const double expected = 2.0 * (1.0 - std::exp(-x));  // = 0.5
    CHECK(std::abs(static_cast<double>(below) / n - expected) < 0.01);
  }
  SUBCASE("narrow interval") {
    for (int i = 0; i < 100; ++i) {
      const double s = f.sample_truncated(2.0 - 1e-7, 2.0 + 1e-7, rng);
      CHECK(s >= 2.0 - 1e-7);
      CHECK(s <= 2.0 + 1e-7);
    }
  }
  SUBCASE("upper tail interval") {
    for (int i = 0; i < 1000; ++i) {
      const double s = f.sample_truncated(12.0, kInf, rng);
      CHECK(s >= 12.0);
      CHECK(s <= 30.0);
    }
  }
  SUBCASE("zero mass") {
    CHECK_THROWS_AS(f.sample_truncated(31.0, 40.0, rng), InfeasibleTruncation);
  }
}

TEST_CASE("Kolmogorov-Smirnov against the grid CDF") {
  std::mt19937_64 g(8);
  for (int t = 0; t < 3; ++t) {
    const SemiparametricDensity f = random_density(g);
    RngStream rng(100 + t);
    const int n = 100000;
    std::vector<double> xs(n);
    for (double& x : xs) x = f.sample_truncated(0.0, kInf, rng);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (int i = 0; i < n; i += 97) {
      const double c = oracle::truncated_mass(f, 0.0, xs[i]);
      ks = std::max({ks, std::abs(c - static_cast<double>(i) / n),
                     std::abs(c - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 0.01);
  }
}

TEST_CASE("total variation and export") {
  const SemiparametricDensity a = fixtures::gamma_density(2.0, 1.0, kGridFloor, 40.0, 4000);
  CHECK(total_variation(a, a) < 1e-12);
  const SemiparametricDensity b = fixtures::gamma_density(2.0, 1.0, 20.0, 40.0, 64);
  CHECK(total_variation(a, b) > 0.99);
  std::ostringstream out;
  write_density_csv(out, fixtures::gamma_density(2.0, 1.0, 0.5, 2.0, 3));
  CHECK(out.str().rfind("x,log_pdf\n", 0) == 0);
  int lines = 0;
  for (char c : out.str()) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 4);
}

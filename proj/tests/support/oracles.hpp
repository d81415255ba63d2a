#pragma once

// Straight-line reference implementations used to check the library. They
// read only the public state of models and densities and share no code paths
// with the library's evaluators.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "gazeid/corpus.hpp"
#include "gazeid/density.hpp"
#include "gazeid/reader_model.hpp"

namespace oracle {

double gamma_log_pdf(double shape, double rate, double x);

/// log of the trapezoid integral of exp(eta1 log q + eta2 q + g(q)) over the
/// quadrature nodes of f, summed in long double.
double log_normalizer(const gazeid::SemiparametricDensity& f);

double log_pdf(const gazeid::SemiparametricDensity& f, double x);

/// Integral over [l, r] of the density linearly interpolated between
/// quadrature nodes, panel by panel.
double truncated_mass(const gazeid::SemiparametricDensity& f, double l, double r);

/// Type and truncation interval of one saccade, derived from word boundaries
/// by linear scans.
struct Saccade {
  int type = 0;  // 1 refixation, 2 next word, 3 forward skip, 4 regression
  double left = 0.0;
  double right = 0.0;
};
Saccade classify(double prev, double next, const gazeid::TextLine& text);

double scanpath_log_likelihood(const gazeid::Scanpath& sp, const gazeid::TextLine& text,
                               const gazeid::ReaderModel& model);

/// FAR and FRR at threshold tau by counting.
struct Rates {
  double far = 0.0;
  double frr = 0.0;
};
Rates rates_at(const std::vector<double>& genuine, const std::vector<double>& impostor,
               double tau);

/// Area under FAR(FRR) from explicit enumeration of every candidate threshold.
double enumerated_auc(const std::vector<double>& genuine,
                      const std::vector<double>& impostor);

}  // namespace oracle

namespace fixtures {

/// Random line of `words` words with integer-free random extents.
gazeid::TextLine random_text(const std::string& id, std::size_t words, std::mt19937_64& rng);

/// Random walk of fixations staying within the line margin.
gazeid::Scanpath random_scanpath(const gazeid::TextLine& text, const std::string& reader,
                                 std::size_t fixations, std::mt19937_64& rng);

/// Model whose densities are gammas with random latent perturbations.
gazeid::ReaderModel random_model(const std::string& id, std::mt19937_64& rng,
                                 double warp = 0.5, std::size_t nodes = 256);

/// Pure-gamma density on a uniform grid over [low, high].
gazeid::SemiparametricDensity gamma_density(double shape, double rate, double low, double high,
                                            std::size_t nodes = gazeid::kDefaultQuadratureCount);

}  // namespace fixtures

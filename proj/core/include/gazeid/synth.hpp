#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gazeid/corpus.hpp"
#include "gazeid/reader_model.hpp"
#include "gazeid/rng.hpp"

namespace gazeid {

/// Size and variability of a synthetic reader population.
struct PopulationSpec {
  std::size_t reader_count = 20;
  std::size_t sentences_train = 72;
  std::size_t sentences_test = 72;
  std::size_t words_min = 6;
  std::size_t words_max = 12;
  std::size_t word_length_min = 2;
  std::size_t word_length_max = 10;
  /// Scales per-reader perturbations of the population parameters.
  double divergence = 0.5;
  /// Height scale of the smooth bumps that warp ground-truth densities away
  /// from the gamma family.
  double gp_warp = 0.5;
  std::uint64_t seed = 1;

  std::size_t sentence_count() const { return sentences_train + sentences_test; }
};

/// Throws DomainError listing every violated constraint.
void require_valid(const PopulationSpec& spec);

/// JSON object with the fields of PopulationSpec; missing fields keep their
/// defaults, unknown fields are rejected. All problems are reported at once.
PopulationSpec parse_population_spec(std::string_view json);
std::string format_population_spec(const PopulationSpec& spec);

/// Standard deviation of the log/logit perturbations per unit of divergence.
inline constexpr double kDivergenceScale = 0.015;

struct GammaDefaults {
  double shape;
  double rate;
};
/// Population base parameters of each role.
GammaDefaults base_gamma(DensityRole role);
TypeProbs base_type_probs();
double base_mu();

/// Lines of uniformly drawn word counts and integer word lengths separated by
/// single-character gaps, starting at coordinate 0.
std::vector<TextLine> make_corpus(const PopulationSpec& spec, RngStream& rng);

/// Ground-truth reader models. Every density is the reader's perturbed gamma
/// multiplied by exp of a sum of three Gaussian bumps.
std::vector<ReaderModel> make_population(const PopulationSpec& spec, RngStream& rng);

struct Dataset {
  Corpus train;
  Corpus test;
};

/// Upper bound on fixations per generated scanpath for a line of `words` words.
std::size_t max_fixations_for(std::size_t words);

/// One scanpath per reader and sentence; sentences are split at random into
/// train and test sets. Durations are rounded to whole milliseconds.
Dataset generate_dataset(const std::vector<ReaderModel>& models,
                         const std::vector<TextLine>& texts, const PopulationSpec& spec,
                         RngStream& rng, std::size_t jobs = 1);

}  // namespace gazeid

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazeid/corpus.hpp"
#include "gazeid/density.hpp"
#include "gazeid/gp.hpp"
#include "gazeid/rng.hpp"
#include "gazeid/sampler.hpp"

namespace gazeid {

/// The eleven densities of a reader model. Amplitude densities of negative
/// saccades (alpha1_bar, alpha4) live on the magnitude |a|.
enum class DensityRole : std::size_t {
  Alpha0,     // initial fixation position
  Alpha1,     // refixation amplitude, positive branch
  Alpha1Bar,  // refixation amplitude, negative branch
  Alpha2,     // next-word amplitude
  Alpha3,     // forward-skip amplitude
  Alpha4,     // regression amplitude
  Delta0,     // initial fixation duration
  Delta1,
  Delta2,
  Delta3,
  Delta4,
};

inline constexpr std::size_t kRoleCount = 11;

std::string_view role_name(DensityRole role);
std::optional<DensityRole> role_from_name(std::string_view name);
inline DensityRole role_from_index(std::size_t i) { return static_cast<DensityRole>(i); }
inline std::size_t role_index(DensityRole role) { return static_cast<std::size_t>(role); }
bool is_duration_role(DensityRole role);
DensityRole duration_role(SaccadeType type);

enum class FitMode { Semiparametric, GammaBaseline };

std::string_view mode_name(FitMode mode);
std::optional<FitMode> mode_from_name(std::string_view name);

using TypeProbs = std::array<double, kSaccadeTypeCount>;

/// Per-reader generative model over saccade types, amplitudes and durations.
struct ReaderModel {
  std::string reader_id;
  FitMode mode = FitMode::Semiparametric;
  TypeProbs pi{};
  double mu = 0.5;
  std::vector<SemiparametricDensity> densities;  // indexed by role
  /// Roles that had too few observations for a fit and use the default density.
  std::array<bool, kRoleCount> fallback{};

  const SemiparametricDensity& density(DensityRole role) const {
    return densities.at(role_index(role));
  }
  /// Throws DomainError unless pi is a distribution, mu in [0, 1] and all
  /// eleven densities are present.
  void validate() const;
};

/// Observations routed to the eleven densities plus the discrete counts.
struct ObservationSet {
  std::array<TruncatedObservations, kRoleCount> roles;
  std::array<std::size_t, kSaccadeTypeCount> type_counts{};
  std::size_t refix_positive = 0;
  std::size_t refix_negative = 0;
  /// Longest line among the texts read, used to scale default densities.
  double max_line_extent = 0.0;

  const TruncatedObservations& operator[](DensityRole role) const {
    return roles[role_index(role)];
  }
};

ObservationSet collect_observations(std::span<const Scanpath> scanpaths,
                                    const Corpus& texts);

struct FitOptions {
  double lambda = 1.0;
  double rho = 1.0;
  /// GP amplitude shared by all densities; bandwidths follow each role's data.
  double amplitude = 1.0;
  MHConfig mh;
  std::size_t quadrature_count = kDefaultQuadratureCount;
  double extension_factor = kDefaultExtensionFactor;
  /// Keep latent values of every retained sample (memory grows with the grid).
  bool keep_latent_samples = false;
};

void require_valid(const FitOptions& options);

struct RoleSummary {
  std::size_t observations = 0;
  bool fallback = false;
  double acceptance_rate = 0.0;
  double bandwidth = 0.0;
  double jitter = 0.0;
  double final_eta_step = 0.0;
};

struct ReaderPosterior {
  std::string reader_id;
  TypeProbs dirichlet{};  // lambda + type counts
  double beta_positive = 0.0;  // rho + positive refixations
  double beta_negative = 0.0;  // rho + negative refixations
  std::array<RoleSummary, kRoleCount> roles{};
  /// Full chain output per role; empty for fallback roles.
  std::array<std::optional<DensityPosterior>, kRoleCount> chains;
  ReaderModel mean_model;
};

/// Dirichlet posterior mean (lambda + c_u) / sum_v (lambda + c_v).
TypeProbs dirichlet_mean(const std::array<std::size_t, kSaccadeTypeCount>& counts,
                         double lambda);
/// Beta posterior mean (rho + c_pos) / (2 rho + c_pos + c_neg).
double beta_mean(std::size_t positive, std::size_t negative, double rho);

/// Support grid for one role: built from the observations and their finite
/// truncation bounds, or a default grid when there are fewer than two.
SupportGrid role_grid(DensityRole role, const ObservationSet& obs,
                      const FitOptions& options);

/// Default density for sparse roles: g = 0, shape 2, rate matched to the data.
SemiparametricDensity fallback_density(DensityRole role, const ObservationSet& obs,
                                       const FitOptions& options);

/// Runs the chain for one role. Fewer than two observations yield nullopt.
std::optional<DensityPosterior> fit_role(DensityRole role, const ObservationSet& obs,
                                         const FitOptions& options,
                                         std::string_view reader_id,
                                         RoleSummary* summary = nullptr);

/// Fits every density of one reader. `jobs` bounds concurrent chains.
ReaderPosterior fit(std::string_view reader_id, std::span<const Scanpath> scanpaths,
                    const Corpus& texts, const FitOptions& options, std::size_t jobs = 1);

/// Maximum-likelihood gamma densities ignoring truncation, g = 0.
ReaderModel fit_gamma_baseline(std::string_view reader_id,
                               std::span<const Scanpath> scanpaths, const Corpus& texts,
                               const FitOptions& options);

/// Fits all readers of a corpus, in reader_ids() order. Chains of all readers
/// share one pool of `jobs` workers; results do not depend on `jobs`.
std::vector<ReaderPosterior> fit_readers(const Corpus& train, const FitOptions& options,
                                         std::size_t jobs);
std::vector<ReaderModel> fit_baselines(const Corpus& train, const FitOptions& options,
                                       std::size_t jobs);

/// Selects the GP amplitude from `candidates` by held-out log-likelihood:
/// each reader's scanpaths are split in two halves, every half is scored under
/// the model fitted on the other half, and the average over readers is maximized.
struct AmplitudeTuning {
  std::vector<double> candidates;
  std::vector<double> scores;
  double best = 0.0;
};
AmplitudeTuning tune_amplitude(const Corpus& train, const FitOptions& options,
                               std::span<const double> candidates, std::size_t jobs);

inline constexpr std::array<double, 6> kAmplitudeGrid = {0.01, 0.1, 0.5, 1.0, 2.0, 5.0};

/// Log-likelihood of a scanpath with the reason for a -inf result.
struct LikelihoodResult {
  double value = 0.0;
  std::optional<std::size_t> failed_event;
  std::string diagnostic;
};

LikelihoodResult scanpath_log_likelihood_detailed(const Scanpath& scanpath,
                                                  const TextLine& text,
                                                  const ReaderModel& model);
double scanpath_log_likelihood(const Scanpath& scanpath, const TextLine& text,
                               const ReaderModel& model);

/// Log-density of an amplitude under the type's truncated density, including
/// the mu split for refixations. Throws InfeasibleTruncation on zero mass.
double amplitude_log_density(const SaccadeEvent& event, const ReaderModel& model);

/// Draws a scanpath. Forward saccades that would leave the line end the
/// scanpath; regressions from the first word are redrawn among the other types.
Scanpath generate(const TextLine& text, const ReaderModel& model,
                  std::size_t max_fixations, RngStream& rng);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first exception
/// by index is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

/// Versioned JSON model files.
inline constexpr int kModelFormatVersion = 1;
std::string format_model(const ReaderModel& model);
ReaderModel parse_model(std::string_view json);
void save_model(const std::filesystem::path& path, const ReaderModel& model);
ReaderModel load_model(const std::filesystem::path& path);

}  // namespace gazeid

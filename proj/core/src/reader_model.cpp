#include "gazeid/reader_model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "gazeid/errors.hpp"
#include "gazeid/gamma.hpp"

namespace gazeid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kLandingAttempts = 200;

constexpr std::array<std::string_view, kRoleCount> kRoleNames = {
    "alpha0", "alpha1", "alpha1_bar", "alpha2", "alpha3", "alpha4",
    "delta0", "delta1", "delta2",     "delta3", "delta4"};

double magnitude(double a) { return std::max(-a, kGridFloor); }

DensityRole amplitude_role(SaccadeType type, RefixBranch branch) {
  switch (type) {
    case SaccadeType::Refixation:
      return branch == RefixBranch::Positive ? DensityRole::Alpha1 : DensityRole::Alpha1Bar;
    case SaccadeType::NextWord: return DensityRole::Alpha2;
    case SaccadeType::ForwardSkip: return DensityRole::Alpha3;
    case SaccadeType::Regression: return DensityRole::Alpha4;
  }
  throw DomainError("unknown saccade type");
}

// Amplitude observation in the coordinates of its density: negative branches
// are mirrored onto the magnitude.
struct RoutedAmplitude {
  DensityRole role;
  double y;
  double l;
  double r;
};

RoutedAmplitude route(const SaccadeEvent& ev) {
  const DensityRole role = amplitude_role(ev.type, ev.branch);
  if (role == DensityRole::Alpha1Bar || role == DensityRole::Alpha4) {
    return {role, magnitude(ev.amplitude), 0.0 - ev.truncation.right,
            0.0 - ev.truncation.left};
  }
  return {role, ev.amplitude, ev.truncation.left, ev.truncation.right};
}

double max_duration(const ObservationSet& obs) {
  double m = 0.0;
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    if (!is_duration_role(role_from_index(i))) continue;
    for (double y : obs.roles[i].y) m = std::max(m, y);
  }
  return m;
}

double bandwidth_for(std::span<const double> y, const SupportGrid& grid) {
  const double bw = average_pairwise_distance(y);
  return bw > 0.0 ? bw : 0.25 * (grid.high() - grid.low());
}

}  // namespace

std::string_view role_name(DensityRole role) { return kRoleNames.at(role_index(role)); }

std::optional<DensityRole> role_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    if (kRoleNames[i] == name) return role_from_index(i);
  }
  return std::nullopt;
}

bool is_duration_role(DensityRole role) { return role_index(role) >= role_index(DensityRole::Delta0); }

DensityRole duration_role(SaccadeType type) {
  return role_from_index(role_index(DensityRole::Delta0) + static_cast<std::size_t>(type));
}

std::string_view mode_name(FitMode mode) {
  return mode == FitMode::Semiparametric ? "semiparametric" : "gamma-baseline";
}

std::optional<FitMode> mode_from_name(std::string_view name) {
  if (name == "semiparametric") return FitMode::Semiparametric;
  if (name == "gamma-baseline") return FitMode::GammaBaseline;
  return std::nullopt;
}

void ReaderModel::validate() const {
  double sum = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0)) throw DomainError("saccade type probabilities must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("saccade type probabilities must sum to 1");
  if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("refixation weight mu must lie in [0, 1]");
  if (densities.size() != kRoleCount) {
    throw DomainError("reader model needs all " + std::to_string(kRoleCount) + " densities");
  }
}

ObservationSet collect_observations(std::span<const Scanpath> scanpaths,
                                    const Corpus& texts) {
  ObservationSet out;
  for (const Scanpath& sp : scanpaths) {
    const TextLine& text = texts.text(sp.text_id);
    out.max_line_extent = std::max(out.max_line_extent, text.line_end() - text.line_begin());
    const Decomposition d = decompose(sp, text);
    auto& a0 = out.roles[role_index(DensityRole::Alpha0)];
    a0.add(std::max(kGridFloor, initial_coordinate(d.initial.position, text)), 0.0, kInf);
    out.roles[role_index(DensityRole::Delta0)].add(d.initial.duration, 0.0, kInf);
    for (const SaccadeEvent& ev : d.events) {
      ++out.type_counts[type_index(ev.type)];
      if (ev.type == SaccadeType::Refixation) {
        ++(ev.branch == RefixBranch::Positive ? out.refix_positive : out.refix_negative);
      }
      const RoutedAmplitude ra = route(ev);
      out.roles[role_index(ra.role)].add(ra.y, ra.l, ra.r);
      out.roles[role_index(duration_role(ev.type))].add(ev.duration, 0.0, kInf);
    }
  }
  return out;
}

void require_valid(const FitOptions& options) {
  if (!(options.lambda > 0.0) || !(options.rho > 0.0)) {
    throw DomainError("lambda and rho must be positive");
  }
  if (!(options.amplitude > 0.0) || !std::isfinite(options.amplitude)) {
    throw DomainError("GP amplitude must be positive");
  }
  if (options.quadrature_count < 2) throw DomainError("quadrature_count must be >= 2");
  if (!(options.extension_factor >= 1.0)) throw DomainError("extension_factor must be >= 1");
  require_valid(options.mh);
}

TypeProbs dirichlet_mean(const std::array<std::size_t, kSaccadeTypeCount>& counts,
                         double lambda) {
  TypeProbs p{};
  double total = 0.0;
  for (std::size_t u = 0; u < kSaccadeTypeCount; ++u) {
    p[u] = lambda + static_cast<double>(counts[u]);
    total += p[u];
  }
  for (double& v : p) v /= total;
  return p;
}

double beta_mean(std::size_t positive, std::size_t negative, double rho) {
  const double a = rho + static_cast<double>(positive);
  return a / (a + rho + static_cast<double>(negative));
}

SupportGrid role_grid(DensityRole role, const ObservationSet& obs,
                      const FitOptions& options) {
  const TruncatedObservations& o = obs[role];
  if (o.size() >= 2) {
    return build_grid(o.y, options.quadrature_count, options.extension_factor,
                      o.finite_bounds());
  }
  double scale;
  if (is_duration_role(role)) {
    scale = max_duration(obs);
    if (!(scale > 0.0)) scale = 1000.0;
  } else {
    scale = obs.max_line_extent;
    if (role == DensityRole::Alpha0) scale += 2.0 * kPositionMargin;
    if (!(scale > 0.0)) scale = 10.0;
  }
  for (double v : o.y) scale = std::max(scale, v);
  if (auto b = o.finite_bounds()) scale = std::max(scale, b->high);
  return SupportGrid(std::vector<double>(o.y.begin(), o.y.end()), kGridFloor,
                     scale * options.extension_factor, options.quadrature_count);
}

SemiparametricDensity fallback_density(DensityRole role, const ObservationSet& obs,
                                       const FitOptions& options) {
  auto grid = std::make_shared<const SupportGrid>(role_grid(role, obs, options));
  const GammaNatural eta = fallback_eta(obs[role].y, *grid);
  return SemiparametricDensity::gamma_on_grid(std::move(grid), eta);
}

std::optional<DensityPosterior> fit_role(DensityRole role, const ObservationSet& obs,
                                         const FitOptions& options,
                                         std::string_view reader_id,
                                         RoleSummary* summary) {
  const TruncatedObservations& o = obs[role];
  RoleSummary local;
  local.observations = o.size();
  if (o.size() < 2) {
    local.fallback = true;
    if (summary) *summary = local;
    return std::nullopt;
  }
  auto grid = std::make_shared<const SupportGrid>(role_grid(role, obs, options));
  const CovarianceConfig cov =
      CovarianceConfig::with_default_jitter(options.amplitude, bandwidth_for(o.y, *grid));
  MHConfig mh = options.mh;
  mh.seed = derive_seed(options.mh.seed, reader_id, role_name(role));
  mh.keep_latent_samples = options.keep_latent_samples;
  DensityPosterior post = run_chain(o, grid, cov, mh);
  local.acceptance_rate = post.acceptance_rate;
  local.bandwidth = cov.bandwidth;
  local.jitter = cov.jitter;
  local.final_eta_step = post.final_eta_step;
  if (summary) *summary = local;
  return post;
}

namespace {

ReaderPosterior assemble(std::string_view reader_id, const ObservationSet& obs,
                         const FitOptions& options,
                         std::array<std::optional<DensityPosterior>, kRoleCount> chains,
                         const std::array<RoleSummary, kRoleCount>& summaries) {
  ReaderPosterior post;
  post.reader_id = std::string(reader_id);
  for (std::size_t u = 0; u < kSaccadeTypeCount; ++u) {
    post.dirichlet[u] = options.lambda + static_cast<double>(obs.type_counts[u]);
  }
  post.beta_positive = options.rho + static_cast<double>(obs.refix_positive);
  post.beta_negative = options.rho + static_cast<double>(obs.refix_negative);
  post.roles = summaries;

  ReaderModel& m = post.mean_model;
  m.reader_id = post.reader_id;
  m.mode = FitMode::Semiparametric;
  m.pi = dirichlet_mean(obs.type_counts, options.lambda);
  m.mu = beta_mean(obs.refix_positive, obs.refix_negative, options.rho);
  m.densities.reserve(kRoleCount);
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    if (chains[i]) {
      m.densities.push_back(chains[i]->mean_density);
    } else {
      m.densities.push_back(fallback_density(role_from_index(i), obs, options));
      m.fallback[i] = true;
    }
  }
  post.chains = std::move(chains);
  return post;
}

}  // namespace

ReaderPosterior fit(std::string_view reader_id, std::span<const Scanpath> scanpaths,
                    const Corpus& texts, const FitOptions& options, std::size_t jobs) {
  require_valid(options);
  if (scanpaths.empty()) throw FitError("reader '" + std::string(reader_id) + "' has no scanpaths");
  const ObservationSet obs = collect_observations(scanpaths, texts);
  std::array<std::optional<DensityPosterior>, kRoleCount> chains;
  std::array<RoleSummary, kRoleCount> summaries{};
  parallel_for(kRoleCount, jobs, [&](std::size_t i) {
    chains[i] = fit_role(role_from_index(i), obs, options, reader_id, &summaries[i]);
  });
  return assemble(reader_id, obs, options, std::move(chains), summaries);
}

ReaderModel fit_gamma_baseline(std::string_view reader_id,
                               std::span<const Scanpath> scanpaths, const Corpus& texts,
                               const FitOptions& options) {
  if (scanpaths.empty()) throw FitError("reader '" + std::string(reader_id) + "' has no scanpaths");
  const ObservationSet obs = collect_observations(scanpaths, texts);
  ReaderModel m;
  m.reader_id = std::string(reader_id);
  m.mode = FitMode::GammaBaseline;
  m.pi = dirichlet_mean(obs.type_counts, options.lambda);
  m.mu = beta_mean(obs.refix_positive, obs.refix_negative, options.rho);
  m.densities.reserve(kRoleCount);
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    const DensityRole role = role_from_index(i);
    auto grid = std::make_shared<const SupportGrid>(role_grid(role, obs, options));
    std::optional<GammaNatural> eta;
    if (obs[role].size() >= 2) {
      try {
        eta = fit_mle(obs[role].y);
      } catch (const FitError&) {
      }
    }
    if (!eta) {
      eta = fallback_eta(obs[role].y, *grid);
      m.fallback[i] = true;
    }
    m.densities.push_back(SemiparametricDensity::gamma_on_grid(std::move(grid), *eta));
  }
  return m;
}

std::vector<ReaderPosterior> fit_readers(const Corpus& train, const FitOptions& options,
                                         std::size_t jobs) {
  require_valid(options);
  const std::vector<std::string> ids = train.reader_ids();
  std::vector<ObservationSet> obs;
  obs.reserve(ids.size());
  for (const std::string& id : ids) {
    const std::vector<Scanpath> sps = train.scanpaths_of(id);
    obs.push_back(collect_observations(sps, train));
  }
  std::vector<std::array<std::optional<DensityPosterior>, kRoleCount>> chains(ids.size());
  std::vector<std::array<RoleSummary, kRoleCount>> summaries(ids.size());
  parallel_for(ids.size() * kRoleCount, jobs, [&](std::size_t task) {
    const std::size_t r = task / kRoleCount;
    const std::size_t i = task % kRoleCount;
    chains[r][i] = fit_role(role_from_index(i), obs[r], options, ids[r], &summaries[r][i]);
  });
  std::vector<ReaderPosterior> out;
  out.reserve(ids.size());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    out.push_back(assemble(ids[r], obs[r], options, std::move(chains[r]), summaries[r]));
  }
  return out;
}

std::vector<ReaderModel> fit_baselines(const Corpus& train, const FitOptions& options,
                                       std::size_t jobs) {
  const std::vector<std::string> ids = train.reader_ids();
  std::vector<std::optional<ReaderModel>> models(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t r) {
    const std::vector<Scanpath> sps = train.scanpaths_of(ids[r]);
    models[r] = fit_gamma_baseline(ids[r], sps, train, options);
  });
  std::vector<ReaderModel> out;
  out.reserve(ids.size());
  for (auto& m : models) out.push_back(std::move(*m));
  return out;
}

AmplitudeTuning tune_amplitude(const Corpus& train, const FitOptions& options,
                               std::span<const double> candidates, std::size_t jobs) {
  if (candidates.empty()) throw DomainError("amplitude tuning needs candidates");
  const std::vector<std::string> ids = train.reader_ids();
  // Folds alternate over each reader's scanpaths.
  std::array<std::vector<Scanpath>, 2> folds;
  for (const std::string& id : ids) {
    const std::vector<Scanpath> sps = train.scanpaths_of(id);
    if (sps.size() < 2) continue;
    for (std::size_t i = 0; i < sps.size(); ++i) folds[i % 2].push_back(sps[i]);
  }
  std::array<Corpus, 2> fold_corpus = {Corpus(train.texts(), folds[0]),
                                       Corpus(train.texts(), folds[1])};

  // held_out[c][k] = log-likelihood of the k-th held-out scanpath under candidate c.
  std::vector<std::vector<double>> held_out(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    FitOptions opt = options;
    opt.amplitude = candidates[c];
    for (std::size_t f = 0; f < 2; ++f) {
      const std::vector<ReaderPosterior> posts = fit_readers(fold_corpus[f], opt, jobs);
      for (const Scanpath& sp : folds[1 - f]) {
        const auto it = std::find_if(posts.begin(), posts.end(), [&](const ReaderPosterior& p) {
          return p.reader_id == sp.reader_id;
        });
        held_out[c].push_back(
            it == posts.end()
                ? -kInf
                : scanpath_log_likelihood(sp, train.text(sp.text_id), it->mean_model));
      }
    }
  }

  // Scanpaths impossible under some candidate are left out for all of them.
  const std::size_t k_total = held_out.front().size();
  std::vector<bool> usable(k_total, true);
  for (const auto& row : held_out) {
    for (std::size_t k = 0; k < k_total; ++k) usable[k] = usable[k] && std::isfinite(row[k]);
  }
  AmplitudeTuning out;
  out.candidates.assign(candidates.begin(), candidates.end());
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < k_total; ++k) {
      if (!usable[k]) continue;
      sum += held_out[c][k];
      ++n;
    }
    out.scores.push_back(n ? sum / static_cast<double>(n) : -kInf);
    if (out.scores[c] > out.scores[best]) best = c;
  }
  out.best = candidates[best];
  return out;
}

double amplitude_log_density(const SaccadeEvent& event, const ReaderModel& model) {
  const RoutedAmplitude ra = route(event);
  const double lp = model.density(ra.role).truncated_log_pdf(ra.y, ra.l, ra.r);
  if (event.type != SaccadeType::Refixation) return lp;
  return (event.branch == RefixBranch::Positive ? std::log(model.mu)
                                                 : std::log1p(-model.mu)) +
         lp;
}

LikelihoodResult scanpath_log_likelihood_detailed(const Scanpath& scanpath,
                                                  const TextLine& text,
                                                  const ReaderModel& model) {
  const Decomposition d = decompose(scanpath, text);
  LikelihoodResult res;
  res.value = model.density(DensityRole::Alpha0)
                  .log_pdf(std::max(kGridFloor, initial_coordinate(d.initial.position, text))) +
              model.density(DensityRole::Delta0).log_pdf(d.initial.duration);
  if (res.value == -kInf) {
    res.diagnostic = "initial fixation has zero density";
    return res;
  }
  for (std::size_t t = 0; t < d.events.size(); ++t) {
    const SaccadeEvent& ev = d.events[t];
    double amp;
    try {
      amp = amplitude_log_density(ev, model);
    } catch (const InfeasibleTruncation& e) {
      res.value = -kInf;
      res.failed_event = t;
      res.diagnostic = e.what();
      return res;
    }
    res.value += std::log(model.pi[type_index(ev.type)]) + amp +
                 model.density(duration_role(ev.type)).log_pdf(ev.duration);
    if (res.value == -kInf) {
      res.failed_event = t;
      res.diagnostic = "event " + std::to_string(t) + " (" + std::string(to_string(ev.type)) +
                       ") has zero probability";
      return res;
    }
  }
  return res;
}

double scanpath_log_likelihood(const Scanpath& scanpath, const TextLine& text,
                               const ReaderModel& model) {
  return scanpath_log_likelihood_detailed(scanpath, text, model).value;
}

namespace {

double full_sample(const SemiparametricDensity& f, RngStream& rng) {
  return f.sample_truncated(f.grid().low(), f.grid().high(), rng);
}

}  // namespace

Scanpath generate(const TextLine& text, const ReaderModel& model,
                  std::size_t max_fixations, RngStream& rng) {
  if (max_fixations == 0) throw DomainError("max_fixations must be positive");
  model.validate();
  Scanpath sp;
  sp.reader_id = model.reader_id;
  sp.text_id = text.id();

  const SemiparametricDensity& a0 = model.density(DensityRole::Alpha0);
  double s = std::numeric_limits<double>::quiet_NaN();
  double last = 0.0;
  for (std::size_t attempt = 0; attempt < kLandingAttempts; ++attempt) {
    last = position_from_initial_coordinate(full_sample(a0, rng), text);
    if (text.word_at(last)) {
      s = last;
      break;
    }
  }
  if (std::isnan(s)) {
    const Word& w = text.word(text.attribute(std::clamp(last, text.line_begin(), text.line_end())));
    s = std::clamp(last, w.left, w.right);
  }
  sp.fixations.push_back({s, full_sample(model.density(DensityRole::Delta0), rng)});

  const SemiparametricDensity& a1 = model.density(DensityRole::Alpha1);
  const SemiparametricDensity& a1bar = model.density(DensityRole::Alpha1Bar);
  const SemiparametricDensity& a2 = model.density(DensityRole::Alpha2);
  const SemiparametricDensity& a3 = model.density(DensityRole::Alpha3);
  const SemiparametricDensity& a4 = model.density(DensityRole::Alpha4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  while (sp.fixations.size() < max_fixations) {
    const FixationContext ctx = fixation_context(s, text);
    const double r_cur = ctx.current_right - s;
    const double l_cur = ctx.current_left - s;
    const double m_pos = r_cur > 0.0 && model.mu > 0.0 ? a1.truncated_mass(0.0, r_cur) : 0.0;
    const double m_neg = l_cur < 0.0 && model.mu < 1.0 ? a1bar.truncated_mass(0.0, -l_cur) : 0.0;

    // Forward moves past the line end stay in the draw and end the scanpath.
    std::array<double, kSaccadeTypeCount> w = model.pi;
    std::array<bool, kSaccadeTypeCount> leaves{};
    if (!(m_pos > 0.0 || m_neg > 0.0)) w[type_index(SaccadeType::Refixation)] = 0.0;
    if (!ctx.next) {
      leaves[type_index(SaccadeType::NextWord)] = true;
    } else if (!(a2.truncated_mass(ctx.next->left - s, ctx.next->right - s) > 0.0)) {
      w[type_index(SaccadeType::NextWord)] = 0.0;
    }
    if (ctx.current + 2 >= text.size()) {
      leaves[type_index(SaccadeType::ForwardSkip)] = true;
    } else if (!(a3.truncated_mass(ctx.next->right - s, kInf) > 0.0)) {
      w[type_index(SaccadeType::ForwardSkip)] = 0.0;
    }
    if (ctx.current == 0 || !(a4.truncated_mass(-l_cur, kInf) > 0.0)) {
      w[type_index(SaccadeType::Regression)] = 0.0;
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0)) {
      if (sp.fixations.size() == 1) {
        throw StructuralInfeasibility("no feasible saccade type from the first fixation on text '" +
                                      text.id() + "'");
      }
      break;
    }
    double u01 = unif(rng) * total;
    std::size_t u = kSaccadeTypeCount;
    for (std::size_t v = 0; v < kSaccadeTypeCount; ++v) {
      if (w[v] == 0.0) continue;
      u = v;
      if (u01 < w[v]) break;
      u01 -= w[v];
    }
    if (leaves[u]) break;
    const SaccadeType type = type_from_index(u);

    double next = 0.0;
    bool landed = true;
    switch (type) {
      case SaccadeType::Refixation: {
        const bool positive = m_neg == 0.0 || (m_pos > 0.0 && unif(rng) < model.mu);
        next = positive ? s + a1.sample_truncated(0.0, r_cur, rng)
                        : s - a1bar.sample_truncated(0.0, -l_cur, rng);
        break;
      }
      case SaccadeType::NextWord:
        next = s + a2.sample_truncated(ctx.next->left - s, ctx.next->right - s, rng);
        break;
      case SaccadeType::ForwardSkip:
      case SaccadeType::Regression: {
        landed = false;
        for (std::size_t attempt = 0; attempt < kLandingAttempts && !landed; ++attempt) {
          if (type == SaccadeType::ForwardSkip) {
            next = s + a3.sample_truncated(ctx.next->right - s, kInf, rng);
            landed = next > ctx.next->right && text.word_at(next).has_value();
          } else {
            next = s - a4.sample_truncated(-l_cur, kInf, rng);
            landed = next < ctx.current_left && text.word_at(next).has_value();
          }
        }
        break;
      }
    }
    if (!landed) break;
    sp.fixations.push_back({next, full_sample(model.density(duration_role(type)), rng)});
    s = next;
  }
  return sp;
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, count);
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count || failed.load()) return;
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed.store(true);
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gazeid

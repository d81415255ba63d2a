#include "gazeid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/distributions/gamma.hpp>
#include <json.hpp>

#include "gazeid/errors.hpp"

namespace gazeid {

namespace {

using nlohmann::json;

constexpr std::size_t kWarpBumps = 3;
constexpr double kTruthUpperQuantile = 0.99999;

std::string padded(char prefix, std::size_t i, std::size_t count) {
  std::size_t width = 1;
  for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10; n /= 10) ++width;
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

double gamma_quantile(double shape, double rate, double p) {
  boost::math::gamma_distribution<double> dist(shape, 1.0 / rate);
  return boost::math::quantile(dist, p);
}

SemiparametricDensity truth_density(double shape, double rate, double warp, RngStream& rng) {
  const double high = gamma_quantile(shape, rate, kTruthUpperQuantile);
  auto grid = std::make_shared<const SupportGrid>(std::vector<double>{}, kGridFloor, high,
                                                  kDefaultQuadratureCount);
  const GammaNatural eta = from_shape_rate(shape, rate);
  std::vector<double> g(grid->points().size(), 0.0);
  if (warp > 0.0) {
    const double lo = gamma_quantile(shape, rate, 0.001);
    const double hi = gamma_quantile(shape, rate, 0.999);
    const double width = (hi - lo) / 8.0;
    std::uniform_real_distribution<double> center(lo, hi);
    std::normal_distribution<double> height(0.0, warp);
    const auto pts = grid->points();
    for (std::size_t b = 0; b < kWarpBumps; ++b) {
      const double c = center(rng);
      const double h = height(rng);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double z = (pts[i] - c) / width;
        g[i] += h * std::exp(-0.5 * z * z);
      }
    }
  }
  return SemiparametricDensity(std::move(grid), eta, std::move(g));
}

}  // namespace

namespace {

std::vector<std::string> spec_problems(const PopulationSpec& s) {
  std::vector<std::string> problems;
  if (s.reader_count < 1) problems.push_back("reader_count must be >= 1");
  if (s.sentences_train < 1) problems.push_back("sentences_train must be >= 1");
  if (s.sentences_test < 1) problems.push_back("sentences_test must be >= 1");
  if (s.words_min < 1) problems.push_back("words_min must be >= 1");
  if (s.words_min > s.words_max) problems.push_back("words_min must not exceed words_max");
  if (s.word_length_min < 1) problems.push_back("word_length_min must be >= 1");
  if (s.word_length_min > s.word_length_max) {
    problems.push_back("word_length_min must not exceed word_length_max");
  }
  if (!(s.divergence >= 0.0) || !std::isfinite(s.divergence)) {
    problems.push_back("divergence must be a non-negative number");
  }
  if (!(s.gp_warp >= 0.0) || !std::isfinite(s.gp_warp)) {
    problems.push_back("gp_warp must be a non-negative number");
  }
  return problems;
}

}  // namespace

void require_valid(const PopulationSpec& s) {
  const std::vector<std::string> problems = spec_problems(s);
  if (problems.empty()) return;
  std::string msg = "invalid population spec:";
  for (const std::string& p : problems) msg += "\n  " + p;
  throw DomainError(msg);
}

PopulationSpec parse_population_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed population spec: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("population spec must be a JSON object");
  PopulationSpec s;
  std::vector<std::string> problems;
  auto count = [&](const char* key, std::size_t& dst) {
    if (!doc.contains(key)) return;
    const json& v = doc.at(key);
    if (!v.is_number_unsigned()) {
      problems.push_back(std::string(key) + " must be a non-negative integer");
    } else {
      dst = v.get<std::size_t>();
    }
  };
  auto real = [&](const char* key, double& dst) {
    if (!doc.contains(key)) return;
    const json& v = doc.at(key);
    if (!v.is_number()) {
      problems.push_back(std::string(key) + " must be a number");
    } else {
      dst = v.get<double>();
    }
  };
  auto seed_field = [&](const char* key, std::uint64_t& dst) {
    if (!doc.contains(key)) return;
    const json& v = doc.at(key);
    if (!v.is_number_unsigned()) {
      problems.push_back(std::string(key) + " must be a non-negative integer");
    } else {
      dst = v.get<std::uint64_t>();
    }
  };
  static const char* const known[] = {"reader_count",    "sentences_train", "sentences_test",
                                      "words_min",       "words_max",       "word_length_min",
                                      "word_length_max", "divergence",      "gp_warp",
                                      "seed"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) {
      problems.push_back("unknown key '" + it.key() + "'");
    }
  }
  count("reader_count", s.reader_count);
  count("sentences_train", s.sentences_train);
  count("sentences_test", s.sentences_test);
  count("words_min", s.words_min);
  count("words_max", s.words_max);
  count("word_length_min", s.word_length_min);
  count("word_length_max", s.word_length_max);
  real("divergence", s.divergence);
  real("gp_warp", s.gp_warp);
  seed_field("seed", s.seed);
  for (std::string& p : spec_problems(s)) problems.push_back(std::move(p));
  if (problems.empty()) return s;
  std::string msg = "invalid population spec:";
  for (const std::string& p : problems) msg += "\n  " + p;
  throw FormatError(msg);
}

std::string format_population_spec(const PopulationSpec& s) {
  nlohmann::ordered_json doc = {{"reader_count", s.reader_count},
                                {"sentences_train", s.sentences_train},
                                {"sentences_test", s.sentences_test},
                                {"words_min", s.words_min},
                                {"words_max", s.words_max},
                                {"word_length_min", s.word_length_min},
                                {"word_length_max", s.word_length_max},
                                {"divergence", s.divergence},
                                {"gp_warp", s.gp_warp},
                                {"seed", s.seed}};
  return doc.dump(2) + "\n";
}

GammaDefaults base_gamma(DensityRole role) {
  switch (role) {
    case DensityRole::Alpha0: return {3.0, 0.5};
    case DensityRole::Alpha1:
    case DensityRole::Alpha1Bar: return {2.0, 1.0};
    case DensityRole::Alpha2: return {6.0, 1.0};
    case DensityRole::Alpha3: return {10.0, 0.8};
    case DensityRole::Alpha4: return {5.0, 0.7};
    default: return {8.0, 0.04};
  }
}

TypeProbs base_type_probs() { return {0.12, 0.55, 0.18, 0.15}; }

double base_mu() { return 0.6; }

std::vector<TextLine> make_corpus(const PopulationSpec& spec, RngStream& rng) {
  require_valid(spec);
  std::uniform_int_distribution<std::size_t> words(spec.words_min, spec.words_max);
  std::uniform_int_distribution<std::size_t> length(spec.word_length_min, spec.word_length_max);
  std::vector<TextLine> out;
  const std::size_t n = spec.sentence_count();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t count = words(rng);
    std::vector<Word> ws;
    ws.reserve(count);
    double x = 0.0;
    for (std::size_t w = 0; w < count; ++w) {
      const double len = static_cast<double>(length(rng));
      ws.push_back({x, x + len});
      x += len + 1.0;
    }
    out.emplace_back(padded('s', i, n), std::move(ws));
  }
  return out;
}

std::vector<ReaderModel> make_population(const PopulationSpec& spec, RngStream& rng) {
  require_valid(spec);
  const double sd = kDivergenceScale * spec.divergence;
  std::vector<ReaderModel> out;
  out.reserve(spec.reader_count);
  for (std::size_t r = 0; r < spec.reader_count; ++r) {
    std::normal_distribution<double> noise(0.0, 1.0);
    auto perturb = [&] { return sd > 0.0 ? sd * noise(rng) : 0.0; };
    ReaderModel m;
    m.reader_id = padded('r', r, spec.reader_count);
    m.mode = FitMode::Semiparametric;

    const TypeProbs base = base_type_probs();
    std::array<double, kSaccadeTypeCount> logits{};
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < kSaccadeTypeCount; ++u) {
      logits[u] = std::log(base[u]) + perturb();
      peak = std::max(peak, logits[u]);
    }
    double total = 0.0;
    for (std::size_t u = 0; u < kSaccadeTypeCount; ++u) {
      m.pi[u] = std::exp(logits[u] - peak);
      total += m.pi[u];
    }
    for (double& p : m.pi) p /= total;
    // Renormalize once more so the sum is exact to rounding.
    const double sum = std::accumulate(m.pi.begin(), m.pi.end(), 0.0);
    for (double& p : m.pi) p /= sum;

    const double mu_logit = std::log(base_mu() / (1.0 - base_mu())) + perturb();
    m.mu = 1.0 / (1.0 + std::exp(-mu_logit));

    m.densities.reserve(kRoleCount);
    for (std::size_t i = 0; i < kRoleCount; ++i) {
      const GammaDefaults g = base_gamma(role_from_index(i));
      const double shape = g.shape * std::exp(perturb());
      const double rate = g.rate * std::exp(perturb());
      m.densities.push_back(truth_density(shape, rate, spec.gp_warp, rng));
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::size_t max_fixations_for(std::size_t words) { return 4 * words + 10; }

Dataset generate_dataset(const std::vector<ReaderModel>& models,
                         const std::vector<TextLine>& texts, const PopulationSpec& spec,
                         RngStream& rng, std::size_t jobs) {
  require_valid(spec);
  if (models.empty() || texts.empty()) throw DomainError("dataset needs models and texts");
  if (texts.size() < spec.sentence_count()) {
    throw DomainError("dataset needs " + std::to_string(spec.sentence_count()) + " sentences, got " +
                      std::to_string(texts.size()));
  }
  std::vector<std::size_t> order(texts.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.sentences_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(spec.sentences_train),
                                    order.begin() + static_cast<std::ptrdiff_t>(spec.sentence_count()));
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  const std::uint64_t base = rng();

  std::vector<std::size_t> used(train_idx);
  used.insert(used.end(), test_idx.begin(), test_idx.end());
  std::vector<Scanpath> generated(models.size() * used.size());
  parallel_for(generated.size(), jobs, [&](std::size_t cell) {
    const ReaderModel& m = models[cell / used.size()];
    const TextLine& text = texts[used[cell % used.size()]];
    RngStream stream = make_stream(base, m.reader_id, text.id());
    try {
      Scanpath sp = generate(text, m, max_fixations_for(text.size()), stream);
      for (Fixation& f : sp.fixations) f.duration = std::max(1.0, std::round(f.duration));
      generated[cell] = std::move(sp);
    } catch (const Error& e) {
      throw Error("generating reader '" + m.reader_id + "' on sentence '" + text.id() +
                  "': " + e.what());
    }
  });

  auto assemble = [&](const std::vector<std::size_t>& idx, std::size_t offset) {
    std::vector<TextLine> ts;
    for (std::size_t i : idx) ts.push_back(texts[i]);
    std::vector<Scanpath> sps;
    for (std::size_t r = 0; r < models.size(); ++r) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        sps.push_back(generated[r * used.size() + offset + k]);
      }
    }
    return Corpus(std::move(ts), std::move(sps));
  };
  return Dataset{assemble(train_idx, 0), assemble(test_idx, train_idx.size())};
}

}  // namespace gazeid

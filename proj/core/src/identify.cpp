#include "gazeid/identify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "gazeid/errors.hpp"

namespace gazeid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

// JSON has no infinities; they are written as strings.
nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::vector<TestUnit> make_test_units(const Corpus& test) {
  std::vector<TestUnit> units;
  for (const std::string& id : test.reader_ids()) {
    units.push_back({id, test.scanpaths_of(id)});
  }
  return units;
}

void ScoreMatrix::validate() const {
  if (log_scores.size() != units.size()) throw DomainError("score matrix has the wrong number of rows");
  for (const auto& row : log_scores) {
    if (row.size() != readers.size()) {
      throw DomainError("score matrix has the wrong number of columns");
    }
    for (double v : row) {
      if (std::isnan(v) || v == kInf) throw DomainError("score matrix entries must be finite or -inf");
    }
  }
}

double score(const TestUnit& unit, const Corpus& texts, const ReaderModel& model) {
  double sum = 0.0;
  for (const Scanpath& sp : unit.scanpaths) {
    sum += scanpath_log_likelihood(sp, texts.text(sp.text_id), model);
  }
  return sum;
}

ScoreMatrix LikelihoodTable::scores() const {
  ScoreMatrix m;
  m.readers = readers;
  for (std::size_t u = 0; u < units.size(); ++u) {
    m.units.push_back(units[u].id);
    std::vector<double> row(readers.size(), 0.0);
    for (const auto& per_scanpath : values[u]) {
      for (std::size_t r = 0; r < readers.size(); ++r) row[r] += per_scanpath[r];
    }
    m.log_scores.push_back(std::move(row));
  }
  return m;
}

LikelihoodTable likelihood_table(std::span<const TestUnit> units, const Corpus& texts,
                                 std::span<const ReaderModel> models, std::size_t jobs) {
  LikelihoodTable t;
  for (const ReaderModel& m : models) t.readers.push_back(m.reader_id);
  t.units.assign(units.begin(), units.end());
  t.values.resize(units.size());
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t u = 0; u < units.size(); ++u) {
    t.values[u].assign(units[u].scanpaths.size(), std::vector<double>(models.size(), 0.0));
    for (std::size_t r = 0; r < models.size(); ++r) cells.emplace_back(u, r);
  }
  parallel_for(cells.size(), jobs, [&](std::size_t c) {
    const auto [u, r] = cells[c];
    const auto& sps = units[u].scanpaths;
    for (std::size_t k = 0; k < sps.size(); ++k) {
      t.values[u][k][r] = scanpath_log_likelihood(sps[k], texts.text(sps[k].text_id), models[r]);
    }
  });
  return t;
}

ScoreMatrix score_matrix(std::span<const TestUnit> units, const Corpus& texts,
                         std::span<const ReaderModel> models, std::size_t jobs) {
  return likelihood_table(units, texts, models, jobs).scores();
}

std::vector<std::optional<std::size_t>> identify(const ScoreMatrix& m) {
  m.validate();
  std::vector<std::optional<std::size_t>> out;
  out.reserve(m.units.size());
  for (const auto& row : m.log_scores) {
    std::optional<std::size_t> best;
    for (std::size_t r = 0; r < row.size(); ++r) {
      if (row[r] == -kInf) continue;
      if (!best || row[r] > row[*best]) best = r;
    }
    out.push_back(best);
  }
  return out;
}

double multiclass_accuracy(std::span<const std::optional<std::string>> predictions,
                           std::span<const std::string> truth) {
  if (predictions.size() != truth.size()) {
    throw DomainError("predictions and truth cover different units");
  }
  if (truth.empty()) throw DomainError("accuracy needs at least one unit");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predictions[i] && *predictions[i] == truth[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double multiclass_accuracy(const ScoreMatrix& m) {
  const auto pred = identify(m);
  std::vector<std::optional<std::string>> names;
  names.reserve(pred.size());
  for (const auto& p : pred) {
    names.push_back(p ? std::optional<std::string>(m.readers[*p]) : std::nullopt);
  }
  return multiclass_accuracy(names, m.units);
}

std::vector<std::vector<double>> normalized_verification_scores(const ScoreMatrix& m) {
  m.validate();
  std::vector<std::vector<double>> out;
  out.reserve(m.log_scores.size());
  const double log_r = std::log(static_cast<double>(m.readers.size()));
  for (const auto& row : m.log_scores) {
    double peak = -kInf;
    for (double v : row) peak = std::max(peak, v);
    std::vector<double> norm(row.size(), -kInf);
    if (peak > -kInf) {
      double sum = 0.0;
      for (double v : row) {
        if (v > -kInf) sum += std::exp(v - peak);
      }
      const double lme = peak + std::log(sum) - log_r;
      for (std::size_t r = 0; r < row.size(); ++r) {
        if (row[r] > -kInf) norm[r] = row[r] - lme;
      }
    }
    out.push_back(std::move(norm));
  }
  return out;
}

VerificationCurve verification_curve(std::span<const double> genuine,
                                     std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) {
    throw DomainError("verification needs at least one genuine and one impostor score");
  }
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  for (double v : gen) {
    if (std::isnan(v)) throw DomainError("NaN verification score");
  }
  for (double v : imp) {
    if (std::isnan(v)) throw DomainError("NaN verification score");
  }
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  VerificationCurve c;
  c.thresholds.reserve(gen.size() + imp.size() + 2);
  c.thresholds.push_back(-kInf);
  c.thresholds.insert(c.thresholds.end(), gen.begin(), gen.end());
  c.thresholds.insert(c.thresholds.end(), imp.begin(), imp.end());
  c.thresholds.push_back(kInf);
  std::sort(c.thresholds.begin(), c.thresholds.end());
  c.thresholds.erase(std::unique(c.thresholds.begin(), c.thresholds.end()), c.thresholds.end());

  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  for (double tau : c.thresholds) {
    const auto below_imp = std::lower_bound(imp.begin(), imp.end(), tau) - imp.begin();
    const auto below_gen = std::lower_bound(gen.begin(), gen.end(), tau) - gen.begin();
    c.far.push_back((ni - static_cast<double>(below_imp)) / ni);
    c.frr.push_back(static_cast<double>(below_gen) / ng);
  }
  for (std::size_t i = 1; i < c.thresholds.size(); ++i) {
    c.auc += (c.frr[i] - c.frr[i - 1]) * 0.5 * (c.far[i] + c.far[i - 1]);
  }
  return c;
}

VerificationCurve verification_curve(const std::vector<std::vector<double>>& normalized,
                                     const ScoreMatrix& m) {
  if (normalized.size() != m.units.size()) throw DomainError("score shapes differ");
  std::vector<double> genuine;
  std::vector<double> impostor;
  for (std::size_t u = 0; u < m.units.size(); ++u) {
    if (normalized[u].size() != m.readers.size()) throw DomainError("score shapes differ");
    for (std::size_t r = 0; r < m.readers.size(); ++r) {
      (m.readers[r] == m.units[u] ? genuine : impostor).push_back(normalized[u][r]);
    }
  }
  return verification_curve(genuine, impostor);
}

EvaluationReport evaluate(const LikelihoodTable& table, const EvaluationOptions& options) {
  const std::size_t total = table.readers.size();
  const std::size_t subset = options.subset_size == 0 ? total : options.subset_size;
  if (subset > total) {
    throw DomainError("subset of " + std::to_string(subset) + " readers exceeds the " +
                      std::to_string(total) + " available");
  }
  if (subset == 0) throw DomainError("evaluation needs at least one reader");
  if (!(options.test_fraction > 0.0 && options.test_fraction <= 1.0)) {
    throw DomainError("test fraction must lie in (0, 1]");
  }
  if (options.repeats == 0) throw DomainError("evaluation needs at least one repeat");

  EvaluationReport rep;
  rep.readers = subset;
  rep.test_fraction = options.test_fraction;
  rep.repeats = options.repeats;
  for (std::size_t i = 0; i < options.repeats; ++i) {
    RngStream rng = make_stream(options.seed, "evaluate", std::to_string(i));
    std::vector<std::size_t> chosen(total);
    std::iota(chosen.begin(), chosen.end(), 0);
    if (subset < total) {
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(subset);
      std::sort(chosen.begin(), chosen.end());
    }
    ScoreMatrix m;
    for (std::size_t r : chosen) m.readers.push_back(table.readers[r]);
    for (std::size_t u = 0; u < table.units.size(); ++u) {
      if (std::find(m.readers.begin(), m.readers.end(), table.units[u].id) == m.readers.end()) {
        continue;
      }
      const std::size_t n = table.values[u].size();
      std::vector<std::size_t> keep(n);
      std::iota(keep.begin(), keep.end(), 0);
      if (options.test_fraction < 1.0 && n > 0) {
        const auto k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(options.test_fraction * static_cast<double>(n))));
        std::shuffle(keep.begin(), keep.end(), rng);
        keep.resize(std::min(k, n));
      }
      std::vector<double> row(chosen.size(), 0.0);
      for (std::size_t k : keep) {
        for (std::size_t j = 0; j < chosen.size(); ++j) row[j] += table.values[u][k][chosen[j]];
      }
      m.units.push_back(table.units[u].id);
      m.log_scores.push_back(std::move(row));
    }
    if (m.units.empty()) throw DomainError("no test unit belongs to the selected readers");
    rep.repeat_accuracy.push_back(multiclass_accuracy(m));
    const bool has_impostors = m.readers.size() > 1;
    rep.repeat_auc.push_back(
        has_impostors ? verification_curve(normalized_verification_scores(m), m).auc
                      : std::numeric_limits<double>::quiet_NaN());
  }
  rep.accuracy = mean_of(rep.repeat_accuracy);
  rep.accuracy_se = standard_error(rep.repeat_accuracy);
  std::vector<double> aucs;
  for (double a : rep.repeat_auc) {
    if (!std::isnan(a)) aucs.push_back(a);
  }
  rep.auc = aucs.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(aucs);
  rep.auc_se = standard_error(aucs);
  return rep;
}

void write_score_csv(std::ostream& out, const ScoreMatrix& m) {
  out << "unit";
  for (const std::string& r : m.readers) out << ',' << r;
  out << '\n';
  for (std::size_t u = 0; u < m.units.size(); ++u) {
    out << m.units[u];
    for (double v : m.log_scores[u]) out << ',' << fmt(v);
    out << '\n';
  }
}

void write_curve_csv(std::ostream& out, const VerificationCurve& curve) {
  out << "tau,far,frr\n";
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    out << fmt(curve.thresholds[i]) << ',' << fmt(curve.far[i]) << ',' << fmt(curve.frr[i])
        << '\n';
  }
}

std::string format_metrics_json(const ScoreMatrix& m, const EvaluationReport& report,
                                const VerificationCurve& curve) {
  using nlohmann::ordered_json;
  const auto pred = identify(m);
  ordered_json predictions = ordered_json::array();
  for (std::size_t u = 0; u < m.units.size(); ++u) {
    ordered_json p = {{"unit", m.units[u]}};
    p["predicted"] = pred[u] ? ordered_json(m.readers[*pred[u]]) : ordered_json(nullptr);
    p["correct"] = pred[u] && m.readers[*pred[u]] == m.units[u];
    predictions.push_back(std::move(p));
  }
  ordered_json doc = {{"readers", m.readers.size()},
                      {"units", m.units.size()},
                      {"accuracy", json_number(report.accuracy)},
                      {"se", json_number(report.accuracy_se)},
                      {"auc", json_number(curve.auc)},
                      {"auc_se", json_number(report.auc_se)},
                      {"repeats", report.repeats},
                      {"predictions", std::move(predictions)}};
  return doc.dump(2) + "\n";
}

}  // namespace gazeid

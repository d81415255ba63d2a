#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gazeid/errors.hpp"
#include "gazeid/identify.hpp"
#include "oracles.hpp"

using namespace gazeid;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

ScoreMatrix matrix(std::vector<std::string> readers, std::vector<std::string> units,
                   std::vector<std::vector<double>> scores) {
  return {std::move(readers), std::move(units), std::move(scores)};
}

// Table with one scanpath per unit whose scores are the given rows, split
// evenly over `per_unit` scanpaths.
LikelihoodTable table_from(const ScoreMatrix& m, std::size_t per_unit) {
  LikelihoodTable t;
  t.readers = m.readers;
  for (std::size_t u = 0; u < m.units.size(); ++u) {
    TestUnit unit{m.units[u], {}};
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < per_unit; ++k) {
      unit.scanpaths.push_back({m.units[u], "t" + std::to_string(k), {{1.0, 100.0}}});
      std::vector<double> row;
      for (double v : m.log_scores[u]) row.push_back(v / static_cast<double>(per_unit));
      rows.push_back(std::move(row));
    }
    t.units.push_back(std::move(unit));
    t.values.push_back(std::move(rows));
  }
  return t;
}

}  // namespace

TEST_CASE("argmax identification") {
  const ScoreMatrix m = matrix({"a", "b", "c"}, {"a", "b", "c", "d"},
                               {{-10, -20, -30}, {-5, -5, -9}, {-40, -50, -35}, {-kInf, -kInf, -kInf}});
  const auto p = identify(m);
  REQUIRE(p.size() == 4);
  CHECK(*p[0] == 0);
  CHECK(*p[1] == 0);  // tie goes to the first reader
  CHECK(*p[2] == 2);
  CHECK_FALSE(p[3].has_value());
  CHECK(multiclass_accuracy(m) == doctest::Approx(0.5));

  const ScoreMatrix three_of_four = matrix({"a", "b"}, {"a", "b", "a", "b"},
                                           {{-1, -2}, {-3, -1}, {-2, -1}, {-5, -4}});
  CHECK(multiclass_accuracy(three_of_four) == doctest::Approx(0.75));
  CHECK(multiclass_accuracy(matrix({"a"}, {"a"}, {{-3}})) == 1.0);

  const std::vector<std::optional<std::string>> pred = {"a", std::nullopt, "c"};
  const std::vector<std::string> truth = {"a", "b", "b"};
  CHECK(multiclass_accuracy(pred, truth) == doctest::Approx(1.0 / 3));

  CHECK_THROWS_AS(identify(matrix({"a"}, {"a"}, {{kInf}})), DomainError);
  CHECK_THROWS_AS(identify(matrix({"a", "b"}, {"a"}, {{1.0}})), DomainError);
}

TEST_CASE("normalized verification scores") {
  SUBCASE("equal scores normalize to zero") {
    const auto n = normalized_verification_scores(matrix({"a", "b", "c"}, {"a"}, {{-7, -7, -7}}));
    for (double v : n[0]) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("a dominant score approaches log R") {
    const auto n = normalized_verification_scores(matrix({"a", "b"}, {"a"}, {{0, -1000}}));
    CHECK(n[0][0] == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("shifting a row leaves it unchanged") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 30.0);
    std::vector<double> row;
    for (int i = 0; i < 8; ++i) row.push_back(z(rng) - 5000.0);
    std::vector<double> shifted = row;
    for (double& v : shifted) v += 4321.5;
    const auto a = normalized_verification_scores(
        matrix({"1", "2", "3", "4", "5", "6", "7", "8"}, {"1"}, {row}));
    const auto b = normalized_verification_scores(
        matrix({"1", "2", "3", "4", "5", "6", "7", "8"}, {"1"}, {shifted}));
    for (std::size_t i = 0; i < row.size(); ++i) CHECK(a[0][i] == doctest::Approx(b[0][i]));
  }
  SUBCASE("-inf scores stay -inf and do not contribute") {
    const auto n = normalized_verification_scores(matrix({"a", "b"}, {"a", "b"},
                                                         {{-3, -kInf}, {-kInf, -kInf}}));
    CHECK(n[0][0] == doctest::Approx(std::log(2.0)));
    CHECK(n[0][1] == -kInf);
    CHECK(n[1][0] == -kInf);
  }
}

TEST_CASE("verification curve") {
  SUBCASE("rates and area match explicit enumeration") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> gen;
      std::vector<double> imp;
      for (int i = 0; i < 1 + trial % 7; ++i) gen.push_back(std::round(4 * (z(rng) + 1.0)) / 4);
      for (int i = 0; i < 1 + trial % 13; ++i) imp.push_back(std::round(4 * z(rng)) / 4);
      if (trial % 5 == 0) imp.push_back(-kInf);
      const VerificationCurve c = verification_curve(gen, imp);
      CHECK(c.auc == doctest::Approx(oracle::enumerated_auc(gen, imp)).epsilon(1e-12));
      CHECK(c.thresholds.front() == -kInf);
      CHECK(c.thresholds.back() == kInf);
      for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
        const oracle::Rates r = oracle::rates_at(gen, imp, c.thresholds[i]);
        CHECK(c.far[i] == r.far);
        CHECK(c.frr[i] == r.frr);
        if (i > 0) {
          CHECK(c.thresholds[i] > c.thresholds[i - 1]);
          CHECK(c.far[i] <= c.far[i - 1]);
          CHECK(c.frr[i] >= c.frr[i - 1]);
        }
      }
    }
  }
  SUBCASE("perfect separation") {
    const std::vector<double> gen = {5, 6, 7};
    const std::vector<double> imp = {1, 2, 3, 4};
    CHECK(verification_curve(gen, imp).auc == 0.0);
    CHECK(verification_curve(imp, gen).auc == 1.0);
  }
  SUBCASE("indistinguishable scores") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> gen;
    std::vector<double> imp;
    for (int i = 0; i < 10000; ++i) {
      gen.push_back(z(rng));
      imp.push_back(z(rng));
    }
    CHECK(std::abs(verification_curve(gen, imp).auc - 0.5) < 0.02);
  }
  SUBCASE("matrix form splits genuine and impostor pairs") {
    const ScoreMatrix m = matrix({"a", "b"}, {"a", "b"}, {{-1, -9}, {-8, -2}});
    const VerificationCurve c = verification_curve(normalized_verification_scores(m), m);
    CHECK(c.auc == 0.0);
  }
  CHECK_THROWS_AS(verification_curve(std::vector<double>{}, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("evaluation") {
  const ScoreMatrix m = matrix({"a", "b", "c"}, {"a", "b", "c"},
                               {{-10, -12, -30}, {-5, -4, -9}, {-40, -30, -35}});
  const LikelihoodTable t = table_from(m, 4);
  SUBCASE("a single full repeat reproduces the full-data metrics") {
    const ScoreMatrix s = t.scores();
    for (std::size_t u = 0; u < 3; ++u) {
      for (std::size_t r = 0; r < 3; ++r) CHECK(s.log_scores[u][r] == doctest::Approx(m.log_scores[u][r]));
    }
    const EvaluationReport rep = evaluate(t, {});
    CHECK(rep.accuracy == doctest::Approx(multiclass_accuracy(m)));
    CHECK(rep.auc == doctest::Approx(verification_curve(normalized_verification_scores(m), m).auc));
    CHECK(rep.accuracy_se == 0.0);
  }
  SUBCASE("one reader is always identified") {
    EvaluationOptions o;
    o.subset_size = 1;
    o.repeats = 6;
    const EvaluationReport rep = evaluate(t, o);
    CHECK(rep.accuracy == 1.0);
    CHECK(std::isnan(rep.auc));
  }
  SUBCASE("subsampling is seeded") {
    EvaluationOptions o;
    o.subset_size = 2;
    o.test_fraction = 0.5;
    o.repeats = 8;
    o.seed = 11;
    const EvaluationReport a = evaluate(t, o);
    const EvaluationReport b = evaluate(t, o);
    CHECK(a.repeat_accuracy == b.repeat_accuracy);
    CHECK(a.repeat_accuracy.size() == 8);
    CHECK(a.accuracy_se >= 0.0);
  }
  SUBCASE("invalid options") {
    EvaluationOptions o;
    o.subset_size = 4;
    CHECK_THROWS_AS(evaluate(t, o), DomainError);
    o = {};
    o.test_fraction = 0.0;
    CHECK_THROWS_AS(evaluate(t, o), DomainError);
    o = {};
    o.repeats = 0;
    CHECK_THROWS_AS(evaluate(t, o), DomainError);
  }
}

TEST_CASE("likelihood table from models") {
  std::mt19937_64 rng(4);
  std::vector<ReaderModel> models = {fixtures::random_model("a", rng), fixtures::random_model("b", rng)};
  std::vector<TextLine> texts;
  std::vector<Scanpath> sps;
  for (int i = 0; i < 6; ++i) {
    texts.push_back(fixtures::random_text("s" + std::to_string(i), 8, rng));
    sps.push_back(fixtures::random_scanpath(texts.back(), i % 2 ? "a" : "b", 10, rng));
  }
  const Corpus test(texts, sps);
  const auto units = make_test_units(test);
  REQUIRE(units.size() == 2);
  CHECK(units[0].id == "b");  // first appearance in the corpus
  CHECK(units[0].scanpaths.size() == 3);
  const LikelihoodTable t1 = likelihood_table(units, test, models, 1);
  const LikelihoodTable t3 = likelihood_table(units, test, models, 3);
  CHECK(t1.values == t3.values);
  const ScoreMatrix s = score_matrix(units, test, models, 2);
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(s.log_scores[u][r] == doctest::Approx(score(units[u], test, models[r])));
      double direct = 0.0;
      for (const Scanpath& sp : units[u].scanpaths) {
        direct += oracle::scanpath_log_likelihood(sp, test.text(sp.text_id), models[r]);
      }
      CHECK(s.log_scores[u][r] == doctest::Approx(direct));
    }
  }
}

TEST_CASE("writers") {
  const ScoreMatrix m = matrix({"a", "b"}, {"a", "b"}, {{-1.5, -kInf}, {-3, -2}});
  std::ostringstream csv;
  write_score_csv(csv, m);
  CHECK(csv.str() == "unit,a,b\na,-1.5,-inf\nb,-3,-2\n");

  const VerificationCurve c = verification_curve(normalized_verification_scores(m), m);
  std::ostringstream curve;
  write_curve_csv(curve, c);
  CHECK(curve.str().rfind("tau,far,frr\n-inf,1,0\n", 0) == 0);

  EvaluationReport rep = evaluate(table_from(m, 1), {});
  const auto doc = nlohmann::json::parse(format_metrics_json(m, rep, c));
  CHECK(doc.at("accuracy") == 1.0);
  CHECK(doc.at("readers") == 2);
  CHECK(doc.at("auc") == 0.0);
  REQUIRE(doc.at("predictions").size() == 2);
  CHECK(doc.at("predictions")[1].at("predicted") == "b");
  CHECK(doc.at("predictions")[1].at("correct") == true);
}

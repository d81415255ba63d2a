#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazeid/corpus.hpp"
#include "gazeid/reader_model.hpp"

namespace gazeid {

/// All test scanpaths of one true reader.
struct TestUnit {
  std::string id;  // the true reader
  std::vector<Scanpath> scanpaths;
};

/// Groups a test corpus by reader, in reader_ids() order.
std::vector<TestUnit> make_test_units(const Corpus& test);

/// log_scores[u][r]: log-likelihood of unit u under reader model r.
struct ScoreMatrix {
  std::vector<std::string> readers;
  std::vector<std::string> units;
  std::vector<std::vector<double>> log_scores;

  void validate() const;
};

/// Sum of scanpath log-likelihoods under the model.
double score(const TestUnit& unit, const Corpus& texts, const ReaderModel& model);

/// Per-scanpath log-likelihoods under every model: table[u][k][r] for the k-th
/// scanpath of unit u. Subsets of scanpaths are scored by summing rows.
struct LikelihoodTable {
  std::vector<std::string> readers;
  std::vector<TestUnit> units;
  std::vector<std::vector<std::vector<double>>> values;

  ScoreMatrix scores() const;
};

LikelihoodTable likelihood_table(std::span<const TestUnit> units, const Corpus& texts,
                                 std::span<const ReaderModel> models, std::size_t jobs);

ScoreMatrix score_matrix(std::span<const TestUnit> units, const Corpus& texts,
                         std::span<const ReaderModel> models, std::size_t jobs);

/// Predicted reader per unit: argmax of its row, first reader on ties.
/// A row without any finite score is unidentifiable (nullopt).
std::vector<std::optional<std::size_t>> identify(const ScoreMatrix& m);

/// Fraction of units whose prediction equals the truth. Unidentifiable units
/// count as wrong.
double multiclass_accuracy(std::span<const std::optional<std::string>> predictions,
                           std::span<const std::string> truth);
double multiclass_accuracy(const ScoreMatrix& m);

/// log_score(u, r) minus the log-mean-exp of the finite scores of unit u.
std::vector<std::vector<double>> normalized_verification_scores(const ScoreMatrix& m);

struct VerificationCurve {
  std::vector<double> thresholds;  // ascending, from -inf to +inf
  std::vector<double> far;         // non-increasing
  std::vector<double> frr;         // non-decreasing
  double auc = 0.0;
};

/// FAR(t) = share of impostor scores >= t, FRR(t) = share of genuine scores < t,
/// swept over every distinct score plus -inf and +inf. AUC is the trapezoid
/// area under FAR as a function of FRR.
VerificationCurve verification_curve(std::span<const double> genuine,
                                     std::span<const double> impostor);
/// Genuine pairs are (unit, reader) with matching ids.
VerificationCurve verification_curve(const std::vector<std::vector<double>>& normalized,
                                     const ScoreMatrix& m);

struct EvaluationOptions {
  std::size_t subset_size = 0;  // readers per repeat; 0 uses all
  double test_fraction = 1.0;   // share of each unit's scanpaths kept
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
};

struct EvaluationReport {
  std::size_t readers = 0;
  double test_fraction = 1.0;
  std::size_t repeats = 0;
  double accuracy = 0.0;
  double accuracy_se = 0.0;
  double auc = 0.0;
  double auc_se = 0.0;
  std::vector<double> repeat_accuracy;
  std::vector<double> repeat_auc;  // NaN when a repeat has no impostor pairs
};

/// Accuracy and AUC averaged over repeats, each on a random subset of readers
/// and a random fraction of every unit's scanpaths. Without subsetting a
/// single repeat reproduces the full-data metrics.
EvaluationReport evaluate(const LikelihoodTable& table, const EvaluationOptions& options);

void write_score_csv(std::ostream& out, const ScoreMatrix& m);
void write_curve_csv(std::ostream& out, const VerificationCurve& curve);
/// {accuracy, se, auc, auc_se, readers, units, predictions: [{unit, predicted, correct}]}.
std::string format_metrics_json(const ScoreMatrix& m, const EvaluationReport& report,
                                const VerificationCurve& curve);

}  // namespace gazeid

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gazeid/corpus.hpp"
#include "gazeid/errors.hpp"
#include "gazeid/identify.hpp"
#include "gazeid/reader_model.hpp"
#include "gazeid/rng.hpp"
#include "gazeid/synth.hpp"

#ifndef GAZEID_VERSION
#define GAZEID_VERSION "unknown"
#endif

namespace gazeid::cli {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

namespace {

constexpr const char* kModelSuffix = ".model.json";

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> mode;
};

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << content;
  if (!out) throw FormatError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw FormatError(std::string(what) + " is not configured");
  if (!fs::is_regular_file(path)) {
    throw FormatError(std::string(what) + " not found: " + path.string());
  }
}

RunConfig load_config(const std::string& path, const Overrides& o) {
  require_file(path, "config file");
  RunConfig c = load_run_config(path);
  if (o.seed) {
    c.seed = *o.seed;
    c.fit.mh.seed = *o.seed;
  }
  if (o.jobs) c.jobs = *o.jobs;
  if (o.mode) {
    const auto m = mode_from_name(*o.mode);
    if (!m) throw FormatError("--mode must be semiparametric or gamma-baseline");
    c.mode = *m;
  }
  c.jobs = resolve_jobs(c.jobs);
  return c;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& c,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  ordered sources = ordered::array();
  for (const fs::path& p : inputs) {
    sources.push_back({{"path", p.generic_string()}, {"hash", hex64(fnv1a64(read_file(p)))}});
  }
  ordered files = ordered::array();
  for (const fs::path& p : outputs) files.push_back(p.filename().generic_string());
  const std::string canon = canonical_config(c);
  ordered doc = {{"command", command},
                 {"version", GAZEID_VERSION},
                 {"config_hash", hex64(fnv1a64(canon))},
                 {"config", ordered::parse(canon)},
                 {"seed", c.seed},
                 {"jobs", c.jobs},
                 {"inputs", std::move(sources)},
                 {"outputs", std::move(files)}};
  write_file(dir / (command + ".manifest.json"), doc.dump(2) + "\n");
}

std::vector<ReaderModel> load_models(const fs::path& dir) {
  if (dir.empty()) throw FormatError("models_dir is not configured");
  if (!fs::is_directory(dir)) throw FormatError("models directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > std::string(kModelSuffix).size() &&
        name.ends_with(kModelSuffix)) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw FormatError("no model files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<ReaderModel> models;
  models.reserve(files.size());
  for (const fs::path& f : files) models.push_back(load_model(f));
  return models;
}

void clear_models(const fs::path& dir) {
  if (!fs::is_directory(dir)) return;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename().string().ends_with(kModelSuffix)) {
      fs::remove(entry.path());
    }
  }
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered number_or_null(double v) {
  return std::isfinite(v) ? ordered(v) : ordered(nullptr);
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, const Overrides& o,
              std::ostream& out) {
  require_file(spec_path, "population spec");
  PopulationSpec spec = parse_population_spec(read_file(spec_path));
  if (o.seed) spec.seed = *o.seed;
  const std::size_t jobs = resolve_jobs(o.jobs.value_or(0));
  const fs::path dir(out_dir);

  RngStream corpus_rng = make_stream(spec.seed, "corpus");
  RngStream population_rng = make_stream(spec.seed, "population");
  RngStream dataset_rng = make_stream(spec.seed, "dataset");
  const std::vector<TextLine> texts = make_corpus(spec, corpus_rng);
  const std::vector<ReaderModel> models = make_population(spec, population_rng);
  const Dataset data = generate_dataset(models, texts, spec, dataset_rng, jobs);

  std::vector<fs::path> outputs = {dir / "train.jsonl", dir / "test.jsonl", dir / "population.json"};
  write_file(outputs[0], format_corpus(data.train));
  write_file(outputs[1], format_corpus(data.test));
  write_file(outputs[2], format_population_spec(spec));
  fs::create_directories(dir / "truth");
  clear_models(dir / "truth");
  for (const ReaderModel& m : models) {
    save_model(dir / "truth" / (m.reader_id + kModelSuffix), m);
  }
  ordered manifest = {{"command", "synth"},
                      {"version", GAZEID_VERSION},
                      {"spec_hash", hex64(fnv1a64(format_population_spec(spec)))},
                      {"seed", spec.seed},
                      {"jobs", jobs},
                      {"readers", models.size()},
                      {"train_scanpaths", data.train.scanpaths().size()},
                      {"test_scanpaths", data.test.scanpaths().size()}};
  write_file(dir / "synth.manifest.json", manifest.dump(2) + "\n");
  out << "synthesized " << models.size() << " readers, " << data.train.scanpaths().size()
      << " train and " << data.test.scanpaths().size() << " test scanpaths into " << dir.string()
      << "\n";
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  require_file(c.train_corpus, "train corpus");
  if (c.models_dir.empty()) throw FormatError("models_dir is not configured");
  if (c.output_dir.empty()) throw FormatError("output_dir is not configured");
  const Corpus train = load_corpus(c.train_corpus);
  if (train.scanpaths().empty()) throw FitError("train corpus has no scanpaths");

  FitOptions fit = c.fit;
  ordered log = {{"mode", std::string(mode_name(c.mode))}};
  std::vector<ReaderModel> models;
  if (c.mode == FitMode::GammaBaseline) {
    models = fit_baselines(train, fit, c.jobs);
  } else {
    if (c.tune_amplitude) {
      const AmplitudeTuning t = tune_amplitude(train, fit, c.amplitude_grid, c.jobs);
      fit.amplitude = t.best;
      ordered scores = ordered::array();
      for (double s : t.scores) scores.push_back(number_or_null(s));
      log["tuning"] = {{"candidates", t.candidates}, {"held_out_log_likelihood", scores}};
    }
    const std::vector<ReaderPosterior> posts = fit_readers(train, fit, c.jobs);
    ordered readers = ordered::array();
    for (const ReaderPosterior& p : posts) {
      ordered roles = ordered::object();
      for (std::size_t i = 0; i < kRoleCount; ++i) {
        const RoleSummary& s = p.roles[i];
        roles[std::string(role_name(role_from_index(i)))] = {
            {"observations", s.observations},   {"fallback", s.fallback},
            {"acceptance_rate", s.acceptance_rate}, {"bandwidth", s.bandwidth},
            {"final_eta_step", s.final_eta_step}};
      }
      readers.push_back({{"reader_id", p.reader_id}, {"roles", std::move(roles)}});
      models.push_back(p.mean_model);
    }
    log["readers"] = std::move(readers);
  }
  log["amplitude"] = fit.amplitude;

  fs::create_directories(c.models_dir);
  clear_models(c.models_dir);
  for (const ReaderModel& m : models) save_model(c.models_dir / (m.reader_id + kModelSuffix), m);
  const fs::path log_path = c.output_dir / "train_log.json";
  write_file(log_path, log.dump(2) + "\n");
  write_manifest(c.output_dir, "train", c, {c.train_corpus}, {log_path});
  out << "trained " << models.size() << " " << mode_name(c.mode) << " models into "
      << c.models_dir.string() << "\n";
  return 0;
}

struct ScoredTest {
  Corpus test;
  LikelihoodTable table;
};

ScoredTest score_test(const RunConfig& c) {
  require_file(c.test_corpus, "test corpus");
  if (c.output_dir.empty()) throw FormatError("output_dir is not configured");
  const std::vector<ReaderModel> models = load_models(c.models_dir);
  ScoredTest s{load_corpus(c.test_corpus), {}};
  const std::vector<TestUnit> units = make_test_units(s.test);
  if (units.empty()) throw FormatError("test corpus has no scanpaths");
  s.table = likelihood_table(units, s.test, models, c.jobs);
  return s;
}

int cmd_identify(const RunConfig& c, std::ostream& out) {
  const ScoredTest s = score_test(c);
  const ScoreMatrix m = s.table.scores();
  EvaluationReport rep = evaluate(s.table, {});
  const bool verifiable = m.readers.size() > 1;
  const VerificationCurve curve =
      verifiable ? verification_curve(normalized_verification_scores(m), m) : VerificationCurve{};
  std::ostringstream csv;
  write_score_csv(csv, m);
  const fs::path scores = c.output_dir / "scores.csv";
  const fs::path predictions = c.output_dir / "predictions.json";
  write_file(scores, csv.str());
  write_file(predictions, format_metrics_json(m, rep, curve));
  write_manifest(c.output_dir, "identify", c, {c.test_corpus}, {scores, predictions});
  out << "accuracy " << rep.accuracy << " over " << m.units.size() << " test units\n";
  return 0;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const ScoredTest s = score_test(c);
  const ScoreMatrix m = s.table.scores();
  const std::size_t readers = m.readers.size();
  const std::uint64_t seed = derive_seed(c.seed, "eval");

  const EvaluationReport full = evaluate(s.table, {});
  const bool verifiable = readers > 1;
  const VerificationCurve curve =
      verifiable ? verification_curve(normalized_verification_scores(m), m) : VerificationCurve{};

  std::ostringstream by_fraction;
  by_fraction << "test_fraction,accuracy,accuracy_se,auc,auc_se\n";
  for (double f : c.test_fractions) {
    const EvaluationReport r = evaluate(s.table, {0, f, f < 1.0 ? c.repeats : 1, seed});
    by_fraction << csv_number(f) << ',' << csv_number(r.accuracy) << ','
                << csv_number(r.accuracy_se) << ',' << csv_number(r.auc) << ','
                << csv_number(r.auc_se) << '\n';
  }
  std::vector<std::size_t> sizes = c.subset_sizes;
  if (sizes.empty()) {
    for (std::size_t k : {2, 5, 10, 20, 50, 100, 200}) {
      if (k < readers) sizes.push_back(k);
    }
    sizes.push_back(readers);
  }
  std::ostringstream by_readers;
  by_readers << "readers,accuracy,accuracy_se,auc,auc_se\n";
  for (std::size_t k : sizes) {
    if (k > readers) throw DomainError("subset size " + std::to_string(k) + " exceeds the " +
                                       std::to_string(readers) + " trained readers");
    const EvaluationReport r = evaluate(s.table, {k, 1.0, k < readers ? c.repeats : 1, seed});
    by_readers << k << ',' << csv_number(r.accuracy) << ',' << csv_number(r.accuracy_se) << ','
               << csv_number(r.auc) << ',' << csv_number(r.auc_se) << '\n';
  }

  std::ostringstream scores_csv;
  write_score_csv(scores_csv, m);
  std::ostringstream curve_csv;
  write_curve_csv(curve_csv, curve);
  const std::vector<fs::path> outputs = {
      c.output_dir / "metrics.json", c.output_dir / "scores.csv", c.output_dir / "curve.csv",
      c.output_dir / "accuracy_vs_fraction.csv", c.output_dir / "accuracy_vs_readers.csv"};
  write_file(outputs[0], format_metrics_json(m, full, curve));
  write_file(outputs[1], scores_csv.str());
  write_file(outputs[2], curve_csv.str());
  write_file(outputs[3], by_fraction.str());
  write_file(outputs[4], by_readers.str());
  write_manifest(c.output_dir, "eval", c, {c.test_corpus}, outputs);
  out << "accuracy " << full.accuracy << ", auc " << curve.auc << " over " << m.units.size()
      << " test units\n";
  return 0;
}

int cmd_export_density(const std::string& model_path, const std::string& role,
                       const std::string& out_path, std::ostream& out) {
  require_file(model_path, "model file");
  const auto r = role_from_name(role);
  if (!r) throw DomainError("unknown density role '" + role + "'");
  const ReaderModel m = load_model(model_path);
  std::ostringstream csv;
  write_density_csv(csv, m.density(*r));
  if (out_path.empty() || out_path == "-") {
    out << csv.str();
  } else {
    write_file(out_path, csv.str());
  }
  return 0;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const CorpusError*>(&e)) return "corpus";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const FitError*>(&e)) return "fit";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const InfeasibleTruncation*>(&e)) return "infeasible-truncation";
  if (dynamic_cast<const StructuralInfeasibility*>(&e)) return "structural-infeasibility";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reader identification from eye movements during reading", "gazeid"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path;
  std::string mode;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", config_path, "JSON run config")->required();
    sub->add_option("--seed", o.seed, "Override the seed");
    sub->add_option("--jobs", o.jobs, "Worker threads (default: all cores)");
  };

  std::string spec_path;
  std::string synth_out = "synth";
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic population and corpus");
  synth->add_option("--config", spec_path, "JSON population spec")->required();
  synth->add_option("--out", synth_out, "Output directory");
  add_common(synth, false);

  CLI::App* train = app.add_subcommand("train", "Fit one model per reader");
  add_common(train, true);
  train->add_option("--mode", o.mode, "semiparametric or gamma-baseline");

  CLI::App* ident = app.add_subcommand("identify", "Score a test corpus and predict readers");
  add_common(ident, true);

  CLI::App* eval = app.add_subcommand("eval", "Identification and verification metrics");
  add_common(eval, true);

  std::string model_path;
  std::string role;
  std::string density_out;
  CLI::App* exp = app.add_subcommand("export-density", "Write one density of a model as CSV");
  exp->add_option("--model", model_path, "Model file")->required();
  exp->add_option("--role", role, "Density role, e.g. alpha2 or delta0")->required();
  exp->add_option("--out", density_out, "Output CSV (default: stdout)");

  std::vector<std::string> argv_storage(args.begin(), args.end());
  argv_storage.insert(argv_storage.begin(), "gazeid");
  std::vector<char*> argv;
  for (std::string& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "{\"error\":\"usage\",\"message\":" << nlohmann::json(std::string(e.what())).dump()
        << "}\n";
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec_path, synth_out, o, out);
    if (exp->parsed()) return cmd_export_density(model_path, role, density_out, out);
    const RunConfig c = load_config(config_path, o);
    if (train->parsed()) return cmd_train(c, out);
    if (ident->parsed()) return cmd_identify(c, out);
    if (eval->parsed()) return cmd_eval(c, out);
  } catch (const std::exception& e) {
    err << "{\"error\":\"" << error_kind(e) << "\",\"message\":"
        << nlohmann::json(std::string(e.what())).dump() << "}\n";
    return 1;
  }
  return 2;
}

}  // namespace gazeid::cli

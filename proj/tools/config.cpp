#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cli.hpp"
#include "gazeid/errors.hpp"

namespace gazeid::cli {

namespace {

using nlohmann::json;

constexpr const char* kKnownKeys[] = {
    "train_corpus",  "test_corpus",    "models_dir",   "output_dir",     "lambda",
    "rho",           "amplitude",      "amplitude_grid", "eta_step",     "iterations",
    "burn_in",       "thinning",       "adapt",        "quadrature_count", "extension_factor",
    "seed",          "jobs",           "mode",         "repeats",        "test_fractions",
    "subset_sizes"};

class Reader {
 public:
  Reader(const json& doc, std::vector<std::string>& problems) : doc_(doc), problems_(problems) {}

  void path(const char* key, const std::filesystem::path& base, std::filesystem::path& dst) {
    if (!doc_.contains(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_string() || v.get<std::string>().empty()) {
      problem(key, "must be a non-empty string");
      return;
    }
    std::filesystem::path p(v.get<std::string>());
    dst = p.is_absolute() ? p : base / p;
  }

  void real(const char* key, double& dst) {
    if (!doc_.contains(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_number()) return problem(key, "must be a number");
    dst = v.get<double>();
  }

  template <typename T>
  void count(const char* key, T& dst) {
    if (!doc_.contains(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_number_unsigned()) return problem(key, "must be a non-negative integer");
    dst = v.get<T>();
  }

  void flag(const char* key, bool& dst) {
    if (!doc_.contains(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_boolean()) return problem(key, "must be true or false");
    dst = v.get<bool>();
  }

  template <typename T>
  void list(const char* key, std::vector<T>& dst) {
    if (!doc_.contains(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_array()) return problem(key, "must be an array");
    std::vector<T> out;
    for (const json& x : v) {
      const bool ok = std::is_integral_v<T> ? x.is_number_unsigned() : x.is_number();
      if (!ok) return problem(key, "has an entry of the wrong type");
      out.push_back(x.get<T>());
    }
    dst = std::move(out);
  }

  void problem(const char* key, const std::string& what) {
    problems_.push_back(std::string(key) + " " + what);
  }

 private:
  const json& doc_;
  std::vector<std::string>& problems_;
};

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed config: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("config must be a JSON object");

  std::vector<std::string> problems;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), it.key()) == std::end(kKnownKeys)) {
      problems.push_back("unknown key '" + it.key() + "'");
    }
  }

  RunConfig c;
  Reader r(doc, problems);
  r.path("train_corpus", base_dir, c.train_corpus);
  r.path("test_corpus", base_dir, c.test_corpus);
  r.path("models_dir", base_dir, c.models_dir);
  r.path("output_dir", base_dir, c.output_dir);
  r.real("lambda", c.fit.lambda);
  r.real("rho", c.fit.rho);
  if (doc.contains("amplitude")) {
    const json& a = doc.at("amplitude");
    if (a.is_string() && a.get<std::string>() == "tune") {
      c.tune_amplitude = true;
    } else if (a.is_number()) {
      c.fit.amplitude = a.get<double>();
    } else {
      r.problem("amplitude", "must be a positive number or \"tune\"");
    }
  }
  r.list("amplitude_grid", c.amplitude_grid);
  r.real("eta_step", c.fit.mh.eta_step);
  r.count("iterations", c.fit.mh.iterations);
  r.count("burn_in", c.fit.mh.burn_in);
  r.count("thinning", c.fit.mh.thinning);
  r.flag("adapt", c.fit.mh.adapt);
  r.count("quadrature_count", c.fit.quadrature_count);
  r.real("extension_factor", c.fit.extension_factor);
  r.count("seed", c.seed);
  r.count("jobs", c.jobs);
  if (doc.contains("mode")) {
    const json& m = doc.at("mode");
    const auto mode = m.is_string() ? mode_from_name(m.get<std::string>()) : std::nullopt;
    if (mode) {
      c.mode = *mode;
    } else {
      r.problem("mode", "must be \"semiparametric\" or \"gamma-baseline\"");
    }
  }
  r.count("repeats", c.repeats);
  r.list("test_fractions", c.test_fractions);
  r.list("subset_sizes", c.subset_sizes);

  if (!(c.fit.lambda > 0.0)) problems.push_back("lambda must be positive");
  if (!(c.fit.rho > 0.0)) problems.push_back("rho must be positive");
  if (!(c.fit.amplitude > 0.0)) problems.push_back("amplitude must be positive");
  if (c.amplitude_grid.empty()) problems.push_back("amplitude_grid must not be empty");
  for (double a : c.amplitude_grid) {
    if (!(a > 0.0)) {
      problems.push_back("amplitude_grid entries must be positive");
      break;
    }
  }
  if (!(c.fit.mh.eta_step >= 0.0)) problems.push_back("eta_step must be non-negative");
  if (c.fit.mh.iterations == 0) problems.push_back("iterations must be positive");
  if (!(c.fit.mh.burn_in < c.fit.mh.iterations)) {
    problems.push_back("burn_in must be smaller than iterations");
  }
  if (c.fit.mh.thinning == 0) problems.push_back("thinning must be >= 1");
  if (c.fit.quadrature_count < 2) problems.push_back("quadrature_count must be >= 2");
  if (!(c.fit.extension_factor >= 1.0)) problems.push_back("extension_factor must be >= 1");
  if (c.repeats == 0) problems.push_back("repeats must be >= 1");
  for (double f : c.test_fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      problems.push_back("test_fractions entries must lie in (0, 1]");
      break;
    }
  }
  for (std::size_t s : c.subset_sizes) {
    if (s == 0) {
      problems.push_back("subset_sizes entries must be >= 1");
      break;
    }
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " config problem(s):";
    for (const std::string& p : problems) msg += "\n  " + p;
    throw FormatError(msg);
  }
  c.fit.mh.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str(), path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string canonical_config(const RunConfig& c) {
  nlohmann::ordered_json doc = {
      {"train_corpus", c.train_corpus.generic_string()},
      {"test_corpus", c.test_corpus.generic_string()},
      {"models_dir", c.models_dir.generic_string()},
      {"output_dir", c.output_dir.generic_string()},
      {"lambda", c.fit.lambda},
      {"rho", c.fit.rho},
      {"amplitude", c.tune_amplitude ? nlohmann::ordered_json("tune") : nlohmann::ordered_json(c.fit.amplitude)},
      {"amplitude_grid", c.amplitude_grid},
      {"eta_step", c.fit.mh.eta_step},
      {"iterations", c.fit.mh.iterations},
      {"burn_in", c.fit.mh.burn_in},
      {"thinning", c.fit.mh.thinning},
      {"adapt", c.fit.mh.adapt},
      {"quadrature_count", c.fit.quadrature_count},
      {"extension_factor", c.fit.extension_factor},
      {"seed", c.seed},
      {"mode", std::string(mode_name(c.mode))},
      {"repeats", c.repeats},
      {"test_fractions", c.test_fractions},
      {"subset_sizes", c.subset_sizes}};
  return doc.dump();
}

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace gazeid::cli

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gazeid/reader_model.hpp"

namespace gazeid::cli {

/// Settings of a train / identify / eval run. Relative paths are resolved
/// against the directory of the config file.
struct RunConfig {
  std::filesystem::path train_corpus;
  std::filesystem::path test_corpus;
  std::filesystem::path models_dir;
  std::filesystem::path output_dir;
  FitOptions fit;
  bool tune_amplitude = false;
  std::vector<double> amplitude_grid{kAmplitudeGrid.begin(), kAmplitudeGrid.end()};
  std::uint64_t seed = 0;
  std::size_t jobs = 0;  // 0 uses every available core
  FitMode mode = FitMode::Semiparametric;
  std::size_t repeats = 10;
  std::vector<double> test_fractions{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<std::size_t> subset_sizes;  // empty: 2, 5, 10, ... up to all readers
};

/// Parses a JSON config. Unknown keys and every invalid value are collected
/// into one FormatError.
RunConfig parse_run_config(std::string_view json, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON of the settings that determine results (jobs excluded).
std::string canonical_config(const RunConfig& config);

std::size_t resolve_jobs(std::size_t jobs);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gazeid::cli

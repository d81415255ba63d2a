#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gazeid/errors.hpp"
#include "gazeid/reader_model.hpp"

namespace gazeid {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

constexpr const char* kFormatName = "gazeid-reader-model";

ordered density_json(const SemiparametricDensity& f, bool fallback) {
  const SupportGrid& grid = f.grid();
  const auto obs = grid.observation_points();
  ordered grid_json = {{"low", grid.low()},
                       {"high", grid.high()},
                       {"quadrature_count", grid.quadrature_count()},
                       {"observation_points", std::vector<double>(obs.begin(), obs.end())}};
  const auto g = f.g_values();
  return ordered{{"eta", {f.eta().eta1, f.eta().eta2}},
                 {"fallback", fallback},
                 {"grid", std::move(grid_json)},
                 {"g", std::vector<double>(g.begin(), g.end())}};
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw FormatError(where + " must be a number");
  return v.get<double>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw FormatError(where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& x : v) out.push_back(number(x, where));
  return out;
}

SemiparametricDensity density_from_json(const json& d, const std::string& where,
                                        bool& fallback) {
  const std::vector<double> eta = numbers(field(d, "eta", where), where + ".eta");
  if (eta.size() != 2) throw FormatError(where + ".eta must have two entries");
  const json& g_json = field(d, "grid", where);
  const json& count = field(g_json, "quadrature_count", where + ".grid");
  if (!count.is_number_unsigned()) {
    throw FormatError(where + ".grid.quadrature_count must be a non-negative integer");
  }
  auto grid = std::make_shared<const SupportGrid>(
      numbers(field(g_json, "observation_points", where + ".grid"),
              where + ".grid.observation_points"),
      number(field(g_json, "low", where + ".grid"), where + ".grid.low"),
      number(field(g_json, "high", where + ".grid"), where + ".grid.high"),
      count.get<std::size_t>());
  std::vector<double> g = numbers(field(d, "g", where), where + ".g");
  if (g.size() != grid->points().size()) {
    throw FormatError(where + ".g has " + std::to_string(g.size()) + " values but the grid has " +
                      std::to_string(grid->points().size()) + " points");
  }
  const json& fb = field(d, "fallback", where);
  if (!fb.is_boolean()) throw FormatError(where + ".fallback must be a boolean");
  fallback = fb.get<bool>();
  return SemiparametricDensity(std::move(grid), {eta[0], eta[1]}, std::move(g));
}

}  // namespace

std::string format_model(const ReaderModel& model) {
  model.validate();
  ordered densities = ordered::object();
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    densities[std::string(role_name(role_from_index(i)))] =
        density_json(model.densities[i], model.fallback[i]);
  }
  ordered doc = {{"format", kFormatName},
                 {"version", kModelFormatVersion},
                 {"reader_id", model.reader_id},
                 {"mode", std::string(mode_name(model.mode))},
                 {"pi", model.pi},
                 {"mu", model.mu},
                 {"densities", std::move(densities)}};
  return doc.dump(1) + "\n";
}

ReaderModel parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  }
  const std::string top = "model";
  const json& format = field(doc, "format", top);
  if (!format.is_string() || format.get<std::string>() != kFormatName) {
    throw FormatError("not a reader model file");
  }
  const json& version = field(doc, "version", top);
  if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion) {
    throw FormatError("unsupported model version " + version.dump() + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  }
  ReaderModel m;
  const json& id = field(doc, "reader_id", top);
  if (!id.is_string()) throw FormatError("reader_id must be a string");
  m.reader_id = id.get<std::string>();
  const json& mode = field(doc, "mode", top);
  const auto parsed_mode = mode.is_string() ? mode_from_name(mode.get<std::string>()) : std::nullopt;
  if (!parsed_mode) throw FormatError("unknown fit mode " + mode.dump());
  m.mode = *parsed_mode;
  const std::vector<double> pi = numbers(field(doc, "pi", top), "pi");
  if (pi.size() != kSaccadeTypeCount) throw FormatError("pi must have four entries");
  std::copy(pi.begin(), pi.end(), m.pi.begin());
  m.mu = number(field(doc, "mu", top), "mu");

  const json& densities = field(doc, "densities", top);
  if (!densities.is_object()) throw FormatError("densities must be an object");
  for (auto it = densities.begin(); it != densities.end(); ++it) {
    if (!role_from_name(it.key())) throw FormatError("unknown density role '" + it.key() + "'");
  }
  m.densities.reserve(kRoleCount);
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    const std::string name(role_name(role_from_index(i)));
    if (!densities.contains(name)) throw FormatError("model file is missing role '" + name + "'");
    bool fallback = false;
    try {
      m.densities.push_back(density_from_json(densities.at(name), name, fallback));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError("role '" + name + "': " + e.what());
    }
    m.fallback[i] = fallback;
  }
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const ReaderModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write model file " + path.string());
  out << format_model(model);
  if (!out) throw FormatError("failed writing model file " + path.string());
}

ReaderModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_model(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace gazeid

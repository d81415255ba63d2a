#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gazeid/corpus.hpp"
#include "gazeid/errors.hpp"

namespace gazeid {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

struct PendingScanpath {
  Scanpath scanpath;
  std::size_t line = 0;
};

void require_keys(const json& rec, std::initializer_list<const char*> allowed) {
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw CorpusError("unknown key '" + it.key() + "'");
  }
}

double number(const json& v, const char* what) {
  if (!v.is_number()) throw CorpusError(std::string(what) + " must be a number");
  return v.get<double>();
}

std::vector<std::pair<double, double>> pairs(const json& v, const char* what) {
  if (!v.is_array()) throw CorpusError(std::string(what) + " must be an array");
  std::vector<std::pair<double, double>> out;
  out.reserve(v.size());
  for (const json& p : v) {
    if (!p.is_array() || p.size() != 2) {
      throw CorpusError(std::string(what) + " entries must be [a, b] pairs");
    }
    out.emplace_back(number(p[0], what), number(p[1], what));
  }
  return out;
}

}  // namespace

Corpus parse_corpus(std::string_view jsonl) {
  std::vector<TextLine> texts;
  std::vector<PendingScanpath> pending;
  std::vector<std::string> problems;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    try {
      json rec = json::parse(line);
      if (!rec.is_object() || !rec.contains("kind") || !rec["kind"].is_string()) {
        throw CorpusError("record must be an object with a string 'kind'");
      }
      const std::string kind = rec["kind"].get<std::string>();
      if (kind == "text") {
        require_keys(rec, {"kind", "text_id", "words"});
        if (!rec.contains("text_id") || !rec["text_id"].is_string()) {
          throw CorpusError("text record needs a string 'text_id'");
        }
        std::vector<Word> words;
        for (auto [l, r] : pairs(rec.value("words", json::array()), "words")) {
          words.push_back({l, r});
        }
        texts.emplace_back(rec["text_id"].get<std::string>(), std::move(words));
      } else if (kind == "scanpath") {
        require_keys(rec, {"kind", "reader_id", "text_id", "fixations"});
        if (!rec.contains("reader_id") || !rec["reader_id"].is_string() ||
            !rec.contains("text_id") || !rec["text_id"].is_string()) {
          throw CorpusError("scanpath record needs string 'reader_id' and 'text_id'");
        }
        PendingScanpath p;
        p.line = line_no;
        p.scanpath.reader_id = rec["reader_id"].get<std::string>();
        p.scanpath.text_id = rec["text_id"].get<std::string>();
        for (auto [s, d] : pairs(rec.value("fixations", json::array()), "fixations")) {
          p.scanpath.fixations.push_back({s, d});
        }
        pending.push_back(std::move(p));
      } else {
        throw CorpusError("unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      problems.push_back("line " + std::to_string(line_no) + ": malformed JSON (" +
                         e.what() + ")");
    } catch (const Error& e) {
      problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (!index.emplace(texts[i].id(), i).second) {
      problems.push_back("duplicate text_id '" + texts[i].id() + "'");
    }
  }
  std::vector<Scanpath> scanpaths;
  scanpaths.reserve(pending.size());
  for (PendingScanpath& p : pending) {
    auto it = index.find(p.scanpath.text_id);
    if (it == index.end()) {
      problems.push_back("line " + std::to_string(p.line) + ": dangling text_id '" +
                         p.scanpath.text_id + "'");
      continue;
    }
    try {
      validate_scanpath(p.scanpath, texts[it->second]);
      scanpaths.push_back(std::move(p.scanpath));
    } catch (const Error& e) {
      problems.push_back("line " + std::to_string(p.line) + ": " + e.what());
    }
  }

  if (!problems.empty()) {
    std::ostringstream msg;
    msg << problems.size() << " invalid record(s)";
    for (const std::string& p : problems) msg << "\n  " << p;
    throw CorpusError(msg.str());
  }
  return Corpus(std::move(texts), std::move(scanpaths));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_corpus(buf.str());
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what());
  }
}

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  for (const TextLine& t : corpus.texts()) {
    ordered words = ordered::array();
    for (const Word& w : t.words()) words.push_back({w.left, w.right});
    ordered rec = {{"kind", "text"}, {"text_id", t.id()}, {"words", std::move(words)}};
    out += rec.dump();
    out += '\n';
  }
  for (const Scanpath& sp : corpus.scanpaths()) {
    ordered fixations = ordered::array();
    for (const Fixation& f : sp.fixations) fixations.push_back({f.position, f.duration});
    ordered rec = {{"kind", "scanpath"},
                {"reader_id", sp.reader_id},
                {"text_id", sp.text_id},
                {"fixations", std::move(fixations)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  out << format_corpus(corpus);
  if (!out) throw CorpusError("failed writing corpus file " + path.string());
}

}  // namespace gazeid

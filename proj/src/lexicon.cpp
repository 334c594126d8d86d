#include "uidpipe/lexicon.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "uidpipe/corpus.hpp"
#include "uidpipe/error.hpp"

namespace uidpipe {

namespace {

struct Row {
  std::size_t line;
  std::vector<std::string> cols;
};

std::vector<Row> read_tsv(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " lexicon '" + path + "'");
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    Row row{line_no, {}};
    std::istringstream fields(line);
    std::string col;
    while (std::getline(fields, col, '\t')) row.cols.push_back(col);
    if (row.cols.empty() || row.cols.front().empty()) continue;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

template <typename V>
void insert_unique(std::map<std::string, V>& m, const std::string& key, V value,
                   const std::string& loc) {
  auto [it, inserted] = m.emplace(key, value);
  if (!inserted && it->second != value) {
    throw DataError(loc + ": conflicting duplicate entry for '" + key + "'");
  }
}

}  // namespace

const std::set<std::string>& default_filled_pauses() {
  static const std::set<std::string> pauses{"uh", "um", "er", "hmm"};
  return pauses;
}

bool Lexicons::is_matrix_verb(const std::string& lemma) const {
  return matrix_verbs.count(to_lower(lemma)) > 0;
}

std::optional<double> Lexicons::frequency(const std::string& word) const {
  auto it = log_frequency.find(to_lower(word));
  if (it == log_frequency.end()) return std::nullopt;
  return it->second;
}

bool Lexicons::is_factive(const std::string& lemma) const {
  auto it = factivity.find(to_lower(lemma));
  return it != factivity.end() && it->second;
}

bool Lexicons::is_filled_pause(const std::string& form) const {
  return filled_pauses.count(to_lower(form)) > 0;
}

Lexicons load_lexicons(const LexiconPaths& paths) {
  Lexicons lex;

  for (const auto& row : read_tsv(paths.verbs, "verb")) {
    lex.matrix_verbs.insert(to_lower(row.cols[0]));
  }
  if (lex.matrix_verbs.empty()) {
    throw ConfigError("verb lexicon '" + paths.verbs + "' lists no lemmas");
  }

  for (const auto& row : read_tsv(paths.frequency, "frequency")) {
    auto loc = where(paths.frequency, row.line);
    if (row.cols.size() < 2) throw DataError(loc + ": expected word<TAB>log frequency");
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(row.cols[1], &used);
      if (used != row.cols[1].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError(loc + ": '" + row.cols[1] + "' is not a number");
    }
    if (!std::isfinite(value)) throw DataError(loc + ": frequency must be finite");
    insert_unique(lex.log_frequency, to_lower(row.cols[0]), value, loc);
  }

  for (const auto& row : read_tsv(paths.factivity, "factivity")) {
    auto loc = where(paths.factivity, row.line);
    if (row.cols.size() < 2 || (row.cols[1] != "0" && row.cols[1] != "1")) {
      throw DataError(loc + ": expected lemma<TAB>0|1");
    }
    insert_unique(lex.factivity, to_lower(row.cols[0]), row.cols[1] == "1", loc);
  }

  if (paths.filled.empty()) {
    lex.filled_pauses = default_filled_pauses();
  } else {
    for (const auto& row : read_tsv(paths.filled, "filled-pause")) {
      lex.filled_pauses.insert(to_lower(row.cols[0]));
    }
  }
  return lex;
}

}  // namespace uidpipe

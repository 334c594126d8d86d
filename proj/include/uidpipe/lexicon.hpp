#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

namespace uidpipe {

struct LexiconPaths {
  std::string verbs;      // lemma per line
  std::string frequency;  // word \t log10 frequency per million
  std::string factivity;  // lemma \t 0|1
  std::string filled;     // form per line; empty path = default set
};

struct Lexicons {
  std::set<std::string> matrix_verbs;
  std::map<std::string, double> log_frequency;
  std::map<std::string, bool> factivity;
  std::set<std::string> filled_pauses;

  bool is_matrix_verb(const std::string& lemma) const;
  std::optional<double> frequency(const std::string& word) const;
  /// Lemmas missing from the factivity table are non-factive.
  bool is_factive(const std::string& lemma) const;
  bool is_filled_pause(const std::string& form) const;
};

const std::set<std::string>& default_filled_pauses();

Lexicons load_lexicons(const LexiconPaths& paths);

}  // namespace uidpipe

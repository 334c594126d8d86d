#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "uidpipe/corpus.hpp"
#include "uidpipe/lexicon.hpp"
#include "uidpipe/predictor_types.hpp"

namespace uidpipe {

/// Location of a matrix verb token; doubles as the join key between the
/// training set, the that-dataset, embeddings, and density estimates.
struct InstanceId {
  std::string conversation_id;
  int utterance_index = 0;
  int verb_index = 0;

  auto operator<=>(const InstanceId&) const = default;
  bool operator==(const InstanceId&) const = default;

  /// "<conversation>:<utterance>:<verb>"
  std::string str() const;
  static InstanceId parse(const std::string& s);
};

struct CCInfo {
  int cc_head_index = 0;
  bool that_present = false;
  std::optional<int> complementizer_index;
  std::optional<int> cc_subject_index;
  int onset_index = 0;  // first token of CC content, complementizer excluded

  bool operator==(const CCInfo&) const = default;
};

/// Every clausal complement of the verb, leftmost first.
std::vector<CCInfo> detect_all_cc(const Utterance& u, int verb_index);
/// The leftmost clausal complement, if any.
std::optional<CCInfo> detect_cc(const Utterance& u, int verb_index);

/// nsubj / nsubj:pass dependent, else an expletive; absent when neither exists.
std::optional<int> matrix_subject(const Utterance& u, int verb_index);

struct TrainingInstance {
  InstanceId id;
  std::string verb_lemma;
  int label = 0;
  int matrix_subject_index = 0;

  bool operator==(const TrainingInstance&) const = default;
};

/// Exclusion counters, kept in the order the rules are applied.
struct ExclusionAudit {
  std::size_t candidates = 0;
  std::vector<std::pair<std::string, std::size_t>> excluded;
  std::size_t retained = 0;

  std::size_t count(const std::string& rule) const;
  std::size_t total_excluded() const;
};

struct TrainingSet {
  std::vector<TrainingInstance> instances;
  ExclusionAudit audit;
};

TrainingSet extract_training_instances(const Corpus& c, const Lexicons& lex);

struct SubcatEntry {
  std::size_t total_occurrences = 0;
  std::size_t cc_occurrences = 0;
  double probability = 0.0;
};

struct SubcatTable {
  std::map<std::string, SubcatEntry> rows;

  std::optional<double> probability(const std::string& lemma) const;
  /// Percentage to two decimals, e.g. "23.95".
  static std::string percentage(const SubcatEntry& e);
};

SubcatTable subcat_probabilities(const std::vector<TrainingInstance>& instances);
/// Builds a table from (lemma, total, cc) counts.
SubcatTable subcat_from_counts(const std::vector<std::tuple<std::string, std::size_t, std::size_t>>& counts);
/// Reads lemma \t total \t cc rows (thousands separators allowed).
SubcatTable load_subcat_counts(const std::string& path);

/// One overt CC in a conversation, in temporal order.
struct CCRecord {
  InstanceId id;
  std::string speaker_id;
  CCInfo cc;
};

struct ThatInstance {
  InstanceId id;
  std::string verb_lemma;
  bool that_present = false;
  CCInfo cc;
  std::string speaker_id;
  int matrix_subject_index = 0;
  std::optional<ControlVector> controls;
};

struct ThatDataset {
  std::vector<ThatInstance> instances;
  ExclusionAudit audit;
  // Every overt CC before exclusions, per conversation, in temporal order.
  std::map<std::string, std::vector<CCRecord>> history;
};

ThatDataset build_that_dataset(const Corpus& c, const Lexicons& lex);

}  // namespace uidpipe

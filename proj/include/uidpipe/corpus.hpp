#pragma once

// In-memory model of dependency-parsed conversation transcripts, read from
// CoNLL-U with three required metadata comments per sentence:
//
//   # conversation_id = <id>
//   # speaker = <id>
//   # utterance_index = <0-based position within the conversation>
//
// Multiword-token ranges ("3-4") and empty nodes ("5.1") are skipped.

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace uidpipe {

struct Token {
  int index = 0;  // 1-based
  std::string form;
  std::string lemma;
  std::string upos;
  std::string xpos = "_";
  std::map<std::string, std::string> feats;
  int head = 0;  // 0 = root
  std::string deprel;
  std::string deps = "_";
  std::string misc = "_";

  bool operator==(const Token&) const = default;

  /// Lowercased surface form.
  std::string lower_form() const;
  std::string lower_lemma() const;
  bool is_verbal() const { return upos == "VERB" || upos == "AUX"; }
  bool is_punct() const { return upos == "PUNCT"; }
  std::optional<std::string> feat(std::string_view key) const;
};

struct Utterance {
  std::vector<Token> tokens;
  std::string speaker_id;
  std::string conversation_id;
  int utterance_index = 0;

  bool operator==(const Utterance&) const = default;

  int size() const { return static_cast<int>(tokens.size()); }
  /// Token by 1-based index; throws ArgumentError when out of range.
  const Token& at(int index) const;
  int root_index() const;
};

using Conversation = std::vector<Utterance>;

struct Corpus {
  // Ordered by conversation id; utterances ordered by utterance_index.
  std::map<std::string, Conversation> conversations;

  bool operator==(const Corpus&) const = default;

  std::size_t utterance_count() const;
  std::size_t token_count() const;
};

Corpus parse_conllu(std::istream& in);
Corpus parse_conllu_string(std::string_view text);
/// Parses several files into one corpus; the result does not depend on the
/// order of `paths`.
Corpus parse_conllu_files(const std::vector<std::string>& paths);

void write_conllu(std::ostream& out, const Corpus& corpus);
std::string to_conllu_string(const Corpus& corpus);

/// Dependents of `head_index` in surface order, optionally restricted to one
/// relation label (exact match). head_index 0 yields the root.
std::vector<Token> children(const Utterance& u, int head_index,
                            std::optional<std::string_view> relation = std::nullopt);

/// Indices of the subtree rooted at `head_index` (inclusive), ascending.
std::vector<int> subtree(const Utterance& u, int head_index);

/// Checks the single-root / head-range / contiguity invariants.
void validate_utterance(const Utterance& u);

std::string to_lower(std::string_view s);

}  // namespace uidpipe

#include "uidpipe/cc_extract.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "uidpipe/error.hpp"

namespace uidpipe {

std::string InstanceId::str() const {
  return conversation_id + ":" + std::to_string(utterance_index) + ":" +
         std::to_string(verb_index);
}

InstanceId InstanceId::parse(const std::string& s) {
  auto last = s.rfind(':');
  auto mid = last == std::string::npos || last == 0 ? std::string::npos : s.rfind(':', last - 1);
  if (mid == std::string::npos) throw DataError("malformed instance id '" + s + "'");
  InstanceId id;
  id.conversation_id = s.substr(0, mid);
  try {
    id.utterance_index = std::stoi(s.substr(mid + 1, last - mid - 1));
    id.verb_index = std::stoi(s.substr(last + 1));
  } catch (const std::exception&) {
    throw DataError("malformed instance id '" + s + "'");
  }
  return id;
}

namespace {

bool is_subject_relation(const std::string& rel) { return rel == "nsubj" || rel == "nsubj:pass"; }

CCInfo describe_cc(const Utterance& u, const Token& head) {
  CCInfo info;
  info.cc_head_index = head.index;
  for (const auto& dep : children(u, head.index)) {
    if (!info.complementizer_index && dep.deprel == "mark" && dep.lower_lemma() == "that" &&
        dep.index < head.index) {
      info.complementizer_index = dep.index;
      info.that_present = true;
    }
    if (!info.cc_subject_index && is_subject_relation(dep.deprel)) {
      info.cc_subject_index = dep.index;
    }
  }
  info.onset_index = head.index;
  for (int i : subtree(u, head.index)) {
    if (info.complementizer_index && i == *info.complementizer_index) continue;
    if (u.at(i).is_punct()) continue;
    info.onset_index = i;
    break;
  }
  return info;
}

bool is_sentence_final(const Utterance& u, int verb_index) {
  for (int i = verb_index + 1; i <= u.size(); ++i)
    if (!u.at(i).is_punct()) return false;
  return true;
}

struct Occurrence {
  const Utterance* utterance;
  const Token* verb;
};

// Matrix-verb tokens of one conversation in temporal order, plus counts of
// lemma matches rejected for non-verbal upos.
std::vector<Occurrence> verb_occurrences(const Conversation& conv, const Lexicons& lex,
                                         std::size_t& non_verbal) {
  std::vector<Occurrence> out;
  for (const auto& u : conv) {
    for (const auto& t : u.tokens) {
      if (!lex.is_matrix_verb(t.lemma)) continue;
      if (!t.is_verbal()) {
        ++non_verbal;
        continue;
      }
      out.push_back({&u, &t});
    }
  }
  return out;
}

}  // namespace

std::vector<CCInfo> detect_all_cc(const Utterance& u, int verb_index) {
  std::vector<CCInfo> out;
  for (const auto& dep : children(u, verb_index, "ccomp")) out.push_back(describe_cc(u, dep));
  return out;
}

std::optional<CCInfo> detect_cc(const Utterance& u, int verb_index) {
  auto all = detect_all_cc(u, verb_index);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::optional<int> matrix_subject(const Utterance& u, int verb_index) {
  std::optional<int> expletive;
  for (const auto& dep : children(u, verb_index)) {
    if (is_subject_relation(dep.deprel)) return dep.index;
    if (dep.deprel == "expl" && !expletive) expletive = dep.index;
  }
  return expletive;
}

std::size_t ExclusionAudit::count(const std::string& rule) const {
  for (const auto& [name, n] : excluded)
    if (name == rule) return n;
  return 0;
}

std::size_t ExclusionAudit::total_excluded() const {
  std::size_t n = 0;
  for (const auto& [name, c] : excluded) n += c;
  return n;
}

TrainingSet extract_training_instances(const Corpus& c, const Lexicons& lex) {
  TrainingSet out;
  std::size_t non_verbal = 0, sentence_final = 0, no_subject = 0;
  for (const auto& [conv_id, conv] : c.conversations) {
    for (const auto& occ : verb_occurrences(conv, lex, non_verbal)) {
      ++out.audit.candidates;
      const auto& u = *occ.utterance;
      const int v = occ.verb->index;
      if (is_sentence_final(u, v)) {
        ++sentence_final;
        continue;
      }
      auto subj = matrix_subject(u, v);
      if (!subj) {
        ++no_subject;
        continue;
      }
      TrainingInstance inst;
      inst.id = {u.conversation_id, u.utterance_index, v};
      inst.verb_lemma = occ.verb->lower_lemma();
      inst.matrix_subject_index = *subj;
      for (const auto& cc : detect_all_cc(u, v)) {
        if (cc.onset_index > v) {
          inst.label = 1;
          break;
        }
      }
      out.instances.push_back(std::move(inst));
    }
  }
  out.audit.excluded = {{"sentence_final", sentence_final}, {"missing_matrix_subject", no_subject}};
  out.audit.retained = out.instances.size();
  // Non-verbal homographs never become candidates; reported separately.
  out.audit.excluded.insert(out.audit.excluded.begin(), {"non_verbal_homograph", non_verbal});
  out.audit.candidates += non_verbal;
  return out;
}

std::optional<double> SubcatTable::probability(const std::string& lemma) const {
  auto it = rows.find(to_lower(lemma));
  if (it == rows.end()) return std::nullopt;
  return it->second.probability;
}

std::string SubcatTable::percentage(const SubcatEntry& e) {
  return fmt::format("{:.2f}", 100.0 * static_cast<double>(e.cc_occurrences) /
                                   static_cast<double>(e.total_occurrences));
}

SubcatTable subcat_from_counts(
    const std::vector<std::tuple<std::string, std::size_t, std::size_t>>& counts) {
  SubcatTable table;
  for (const auto& [lemma, total, cc] : counts) {
    if (total == 0) continue;
    if (cc > total) {
      throw DataError("lemma '" + lemma + "' has more CC occurrences than occurrences");
    }
    table.rows[to_lower(lemma)] = {total, cc,
                                   static_cast<double>(cc) / static_cast<double>(total)};
  }
  return table;
}

SubcatTable subcat_probabilities(const std::vector<TrainingInstance>& instances) {
  if (instances.empty()) throw ArgumentError("subcategorization needs at least one instance");
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& inst : instances) {
    auto& [total, cc] = counts[inst.verb_lemma];
    ++total;
    if (inst.label == 1) ++cc;
  }
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> rows;
  for (const auto& [lemma, tc] : counts) rows.emplace_back(lemma, tc.first, tc.second);
  return subcat_from_counts(rows);
}

SubcatTable load_subcat_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open subcategorization counts '" + path + "'");
  auto parse_count = [&](std::string s, std::size_t line) {
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
    try {
      std::size_t used = 0;
      auto v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing");
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line) + ": bad count '" + s + "'");
    }
  };
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string lemma, total, cc;
    if (!std::getline(fields, lemma, '\t') || !std::getline(fields, total, '\t') ||
        !std::getline(fields, cc, '\t')) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected lemma<TAB>total<TAB>cc");
    }
    if (lemma == "lemma") continue;  // header
    rows.emplace_back(lemma, parse_count(total, line_no), parse_count(cc, line_no));
  }
  return subcat_from_counts(rows);
}

ThatDataset build_that_dataset(const Corpus& c, const Lexicons& lex) {
  ThatDataset out;
  std::size_t non_verbal = 0;
  std::size_t first_cc = 0, missing_subject = 0, multiple = 0;

  for (const auto& [conv_id, conv] : c.conversations) {
    struct Candidate {
      CCRecord record;
      std::string lemma;
      std::optional<int> matrix_subj;
    };
    std::vector<Candidate> candidates;
    for (const auto& occ : verb_occurrences(conv, lex, non_verbal)) {
      const auto& u = *occ.utterance;
      const int v = occ.verb->index;
      for (const auto& cc : detect_all_cc(u, v)) {
        if (cc.onset_index <= v) continue;  // matrix verb must precede the CC
        candidates.push_back({{{u.conversation_id, u.utterance_index, v}, u.speaker_id, cc},
                              occ.verb->lower_lemma(),
                              matrix_subject(u, v)});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return std::tie(a.record.id.utterance_index, a.record.cc.onset_index) <
                              std::tie(b.record.id.utterance_index, b.record.cc.onset_index);
                     });
    auto& history = out.history[conv_id];
    for (const auto& cand : candidates) history.push_back(cand.record);
    out.audit.candidates += candidates.size();

    // Rule 1: the conversation's first CC has no predecessor to prime from.
    std::vector<const Candidate*> kept;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (i == 0) {
        ++first_cc;
        continue;
      }
      kept.push_back(&candidates[i]);
    }
    // Rule 2: both subjects must be present.
    std::vector<const Candidate*> with_subjects;
    for (const auto* cand : kept) {
      if (!cand->matrix_subj || !cand->record.cc.cc_subject_index) {
        ++missing_subject;
        continue;
      }
      with_subjects.push_back(cand);
    }
    // Rule 3: one CC per verb token, the leftmost survivor.
    std::set<InstanceId> seen;
    for (const auto* cand : with_subjects) {
      if (!seen.insert(cand->record.id).second) {
        ++multiple;
        continue;
      }
      ThatInstance inst;
      inst.id = cand->record.id;
      inst.verb_lemma = cand->lemma;
      inst.that_present = cand->record.cc.that_present;
      inst.cc = cand->record.cc;
      inst.speaker_id = cand->record.speaker_id;
      inst.matrix_subject_index = *cand->matrix_subj;
      out.instances.push_back(std::move(inst));
    }
  }
  out.audit.excluded = {{"first_cc_in_conversation", first_cc},
                        {"missing_subject", missing_subject},
                        {"additional_cc_of_verb", multiple}};
  out.audit.retained = out.instances.size();
  return out;
}

}  // namespace uidpipe

#include "uidpipe/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "uidpipe/error.hpp"

namespace uidpipe {

std::string_view to_string(SubjectForm f) {
  switch (f) {
    case SubjectForm::I: return "I";
    case SubjectForm::You: return "You";
    case SubjectForm::OtherPronoun: return "OtherPronoun";
    case SubjectForm::OtherNoun: return "OtherNoun";
  }
  return "OtherNoun";
}

SubjectForm subject_form_from_string(std::string_view s) {
  if (s == "I") return SubjectForm::I;
  if (s == "You") return SubjectForm::You;
  if (s == "OtherPronoun") return SubjectForm::OtherPronoun;
  if (s == "OtherNoun") return SubjectForm::OtherNoun;
  throw CodingError("unknown subject form '" + std::string(s) + "'");
}

std::string_view to_string(Tense t) { return t == Tense::Base ? "base" : "inflected"; }

std::string_view to_string(Distance d) { return d == Distance::Local ? "local" : "nonlocal"; }

SubjectForm classify_subject_form(const Token& t) {
  auto form = t.lower_form();
  if (form == "i") return SubjectForm::I;
  if (form == "you") return SubjectForm::You;
  if (t.upos == "PRON") return SubjectForm::OtherPronoun;
  return SubjectForm::OtherNoun;
}

FrequencyModel::FrequencyModel(const Lexicons& lex, const Corpus& corpus) : lex_(&lex) {
  for (const auto& [id, conv] : corpus.conversations) {
    for (const auto& u : conv) {
      for (const auto& t : u.tokens) {
        if (t.is_punct()) continue;
        ++counts_[t.lower_form()];
        ++total_;
      }
    }
  }
}

FrequencyModel::Lookup FrequencyModel::lookup(const Token& t) const {
  if (auto f = lex_->frequency(t.form)) return {*f, true};
  if (auto f = lex_->frequency(t.lemma)) return {*f, true};
  auto it = counts_.find(t.lower_form());
  double count = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
  double total = std::max<double>(1.0, static_cast<double>(total_));
  return {std::log10((count + 1.0) * 1e6 / total), false};
}

const Utterance& find_utterance(const Corpus& c, const InstanceId& id) {
  auto conv = c.conversations.find(id.conversation_id);
  if (conv != c.conversations.end()) {
    for (const auto& u : conv->second)
      if (u.utterance_index == id.utterance_index) return u;
  }
  throw DataError("instance " + id.str() + " does not resolve to an utterance");
}

namespace {

Tense classify_tense(const Token& verb) {
  if (verb.lemma.empty() || verb.lemma == "_") {
    auto form = verb.feat("VerbForm");
    return form && *form == "Inf" ? Tense::Base : Tense::Inflected;
  }
  return verb.lower_form() == verb.lower_lemma() ? Tense::Base : Tense::Inflected;
}

std::string identity_key(const Token& t) {
  return t.lemma.empty() || t.lemma == "_" ? t.lower_form() : t.lower_lemma();
}

bool excluded_from_repetition(const Token& t) {
  return t.upos == "ADJ" || t.upos == "ADV" || t.is_punct();
}

}  // namespace

FeatureVector linguistic_features(const TrainingInstance& inst, const Utterance& u,
                                  const Lexicons& lex, const SubcatTable& subcat,
                                  const FrequencyModel& freq) {
  const Token& verb = u.at(inst.id.verb_index);
  const Token& subj = u.at(inst.matrix_subject_index);
  auto p = subcat.probability(inst.verb_lemma);
  if (!p) throw DataError("verb '" + inst.verb_lemma + "' missing from subcategorization table");

  FeatureVector f;
  f.subcat_probability = *p;
  f.verb_log_frequency = freq.log_frequency(verb);
  f.factivity = lex.is_factive(inst.verb_lemma);
  f.tense = classify_tense(verb);
  f.position = verb.index;
  f.subject_form = classify_subject_form(subj);
  f.subject_log_frequency = freq.log_frequency(subj);
  return f;
}

ControlVector control_variables(const ThatInstance& inst, const Conversation& conversation,
                                const Lexicons& lex, const std::vector<CCRecord>& history,
                                const FrequencyModel& freq) {
  const Utterance* found = nullptr;
  for (const auto& u : conversation)
    if (u.utterance_index == inst.id.utterance_index) found = &u;
  if (!found) throw DataError("instance " + inst.id.str() + " not in the given conversation");
  const Utterance& u = *found;

  const CCRecord* previous = nullptr;
  for (const auto& rec : history) {
    if (std::tie(rec.id.utterance_index, rec.cc.onset_index) <
        std::tie(inst.id.utterance_index, inst.cc.onset_index)) {
      previous = &rec;
    }
  }
  if (!previous) {
    throw std::logic_error("instance " + inst.id.str() +
                           " is its conversation's first CC and should have been excluded");
  }
  if (!inst.cc.cc_subject_index) {
    throw DataError("instance " + inst.id.str() + " has no CC subject");
  }

  const int v = inst.id.verb_index;
  const Token& verb = u.at(v);
  const Token& matrix_subj = u.at(inst.matrix_subject_index);
  const Token& cc_subj = u.at(*inst.cc.cc_subject_index);
  const int onset = inst.cc.onset_index;

  ControlVector c;
  c.cc_subject_frequency = freq.log_frequency(cc_subj);
  c.cc_subject_form = classify_subject_form(cc_subj);
  c.matrix_verb_frequency = freq.log_frequency(verb);
  c.matrix_subject_form = classify_subject_form(matrix_subj);
  c.co_referentiality = identity_key(matrix_subj) == identity_key(cc_subj) &&
                        c.matrix_subject_form == c.cc_subject_form;
  c.previous_that = previous->cc.that_present;

  bool local = onset == v + 1 ||
               (inst.cc.that_present && inst.cc.complementizer_index == v + 1 && onset == v + 2);
  c.verb_cc_distance = local ? Distance::Local : Distance::Nonlocal;

  for (int i : subtree(u, cc_subj.index))
    if (i != cc_subj.index && !u.at(i).is_punct()) ++c.cc_subject_length;
  for (int i : subtree(u, inst.cc.cc_head_index))
    if (i > cc_subj.index && !u.at(i).is_punct()) ++c.cc_remainder_length;

  c.verb_id = 0;
  for (int i = 1; i <= v; ++i)
    if (u.at(i).is_verbal()) ++c.verb_id;

  c.that_doubling = u.at(onset).lower_form() == "that";

  for (int i = 1; i < onset; ++i) {
    if (i != v && lex.is_filled_pause(u.at(i).form)) c.filled_word = true;
  }
  for (int i = 1; i + 1 < onset; ++i) {
    const Token& a = u.at(i);
    const Token& b = u.at(i + 1);
    if (excluded_from_repetition(a) || excluded_from_repetition(b)) continue;
    if (lex.is_filled_pause(a.form)) continue;
    if (a.lower_form() == b.lower_form()) c.repetition = true;
  }
  return c;
}

namespace {

const std::vector<std::string> kSubjectLevels{"I", "You", "OtherPronoun", "OtherNoun"};

std::string yes_no(bool b) { return b ? "yes" : "no"; }
std::string present(bool b) { return b ? "present" : "absent"; }

}  // namespace

DataTable control_table(const std::vector<ThatInstance>& instances,
                        const std::vector<double>& density) {
  if (density.size() != instances.size()) {
    throw ArgumentError("density vector does not match the instance count");
  }
  std::vector<double> cc_freq, verb_freq, subj_len, rem_len, verb_id;
  std::vector<std::string> cc_form, coref, prev, dist, matrix_form, doubling, filled, rep;
  for (const auto& inst : instances) {
    if (!inst.controls) throw DataError("instance " + inst.id.str() + " has no controls");
    const auto& c = *inst.controls;
    cc_freq.push_back(c.cc_subject_frequency);
    verb_freq.push_back(c.matrix_verb_frequency);
    subj_len.push_back(c.cc_subject_length);
    rem_len.push_back(c.cc_remainder_length);
    verb_id.push_back(c.verb_id);
    cc_form.emplace_back(to_string(c.cc_subject_form));
    coref.push_back(yes_no(c.co_referentiality));
    prev.push_back(present(c.previous_that));
    dist.emplace_back(to_string(c.verb_cc_distance));
    matrix_form.emplace_back(to_string(c.matrix_subject_form));
    doubling.push_back(present(c.that_doubling));
    filled.push_back(present(c.filled_word));
    rep.push_back(present(c.repetition));
  }
  DataTable t;
  t.rows = instances.size();
  t.add("information_density", std::vector<double>(density));
  t.add("cc_subject_frequency", std::move(cc_freq));
  t.add("cc_subject_form", std::move(cc_form));
  t.add("matrix_verb_frequency", std::move(verb_freq));
  t.add("co_referentiality", std::move(coref));
  t.add("previous_that", std::move(prev));
  t.add("verb_cc_distance", std::move(dist));
  t.add("cc_subject_length", std::move(subj_len));
  t.add("cc_remainder_length", std::move(rem_len));
  t.add("matrix_subject_form", std::move(matrix_form));
  t.add("verb_id", std::move(verb_id));
  t.add("that_doubling", std::move(doubling));
  t.add("filled_word", std::move(filled));
  t.add("repetition", std::move(rep));
  return t;
}

std::vector<TermSpec> that_model_terms() {
  using K = TermKind;
  return {
      {"Information Density", "information_density", K::Continuous, {}},
      {"CC Subject Frequency", "cc_subject_frequency", K::Continuous, {}},
      {"CC Subject Form", "cc_subject_form", K::SuccessiveDifference, kSubjectLevels},
      {"Matrix Verb Frequency", "matrix_verb_frequency", K::Continuous, {}},
      {"Co-referentiality", "co_referentiality", K::Binary, {"yes", "no"}},
      {"Previous that", "previous_that", K::Binary, {"present", "absent"}},
      {"Matrix Verb-CC Distance", "verb_cc_distance", K::Binary, {"local", "nonlocal"}},
      {"CC Subject Length", "cc_subject_length", K::Continuous, {}},
      {"CC Remainder Length", "cc_remainder_length", K::Continuous, {}},
      {"Matrix Subject Form", "matrix_subject_form", K::SuccessiveDifference, kSubjectLevels},
      {"Verb ID", "verb_id", K::Continuous, {}},
      {"that-Doubling", "that_doubling", K::Binary, {"present", "absent"}},
      {"Filled Word", "filled_word", K::Binary, {"present", "absent"}},
      {"Repetition", "repetition", K::Binary, {"present", "absent"}},
  };
}

DataTable feature_table(const std::vector<FeatureVector>& features) {
  std::vector<double> subcat, vfreq, pos, sfreq;
  std::vector<std::string> fact, tense, form;
  for (const auto& f : features) {
    subcat.push_back(f.subcat_probability);
    vfreq.push_back(f.verb_log_frequency);
    fact.push_back(f.factivity ? "factive" : "nonfactive");
    tense.emplace_back(to_string(f.tense));
    pos.push_back(f.position);
    form.emplace_back(to_string(f.subject_form));
    sfreq.push_back(f.subject_log_frequency);
  }
  DataTable t;
  t.rows = features.size();
  t.add("subcat_probability", std::move(subcat));
  t.add("verb_log_frequency", std::move(vfreq));
  t.add("factivity", std::move(fact));
  t.add("tense", std::move(tense));
  t.add("position", std::move(pos));
  t.add("subject_form", std::move(form));
  t.add("subject_log_frequency", std::move(sfreq));
  return t;
}

std::vector<TermSpec> linguistic_feature_terms() {
  using K = TermKind;
  return {
      {"Subcategorization Probability", "subcat_probability", K::Continuous, {}},
      {"Verb Frequency", "verb_log_frequency", K::Continuous, {}},
      {"Factivity", "factivity", K::Binary, {"factive", "nonfactive"}},
      {"Tense", "tense", K::Binary, {"inflected", "base"}},
      {"Position", "position", K::Continuous, {}},
      {"Subject Form", "subject_form", K::SuccessiveDifference, kSubjectLevels},
      {"Subject Frequency", "subject_log_frequency", K::Continuous, {}},
  };
}

}  // namespace uidpipe

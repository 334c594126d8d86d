#pragma once

#include <string>
#include <string_view>

namespace uidpipe {

enum class SubjectForm { I, You, OtherPronoun, OtherNoun };

/// Level labels in the coding order I < You < OtherPronoun < OtherNoun.
std::string_view to_string(SubjectForm f);
SubjectForm subject_form_from_string(std::string_view s);

enum class Tense { Base, Inflected };
std::string_view to_string(Tense t);

enum class Distance { Local, Nonlocal };
std::string_view to_string(Distance d);

struct FeatureVector {
  double subcat_probability = 0.0;
  double verb_log_frequency = 0.0;
  bool factivity = false;
  Tense tense = Tense::Base;
  int position = 1;
  SubjectForm subject_form = SubjectForm::OtherNoun;
  double subject_log_frequency = 0.0;

  bool operator==(const FeatureVector&) const = default;
};

struct ControlVector {
  double cc_subject_frequency = 0.0;
  SubjectForm cc_subject_form = SubjectForm::OtherNoun;
  double matrix_verb_frequency = 0.0;
  bool co_referentiality = false;
  bool previous_that = false;
  Distance verb_cc_distance = Distance::Local;
  int cc_subject_length = 0;
  int cc_remainder_length = 0;
  SubjectForm matrix_subject_form = SubjectForm::OtherNoun;
  int verb_id = 1;
  bool that_doubling = false;
  bool filled_word = false;
  bool repetition = false;

  bool operator==(const ControlVector&) const = default;
};

}  // namespace uidpipe

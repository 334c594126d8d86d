#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "../support/conllu.hpp"
#include "uidpipe/cc_extract.hpp"
#include "uidpipe/design.hpp"
#include "uidpipe/error.hpp"
#include "uidpipe/predictors.hpp"

using namespace uidpipe;
using uidpipe::testing::i_think_he_left;
using uidpipe::testing::sentence;

namespace {

Lexicons lexicon() {
  Lexicons lex;
  lex.matrix_verbs = {"think", "know", "complain", "say"};
  lex.factivity = {{"know", true}, {"think", false}};
  lex.log_frequency = {{"think", 3.42}, {"i", 4.5}};
  lex.filled_pauses = {"uh", "um"};
  return lex;
}

// Builds a two-utterance conversation: a priming CC, then `second`.
struct Scenario {
  Corpus corpus;
  ThatDataset data;
  ControlVector controls;
};

Scenario controls_for(const std::vector<std::string>& second, bool primer_that = false) {
  auto primer = i_think_he_left();
  if (primer_that) {
    primer = {"I I PRON 2 nsubj", "think think VERB 0 root", "that that SCONJ 5 mark", "he he PRON 5 nsubj",
              "left leave VERB 2 ccomp"};
  }
  Scenario s;
  const auto lex = lexicon();
  s.corpus = parse_conllu_string(sentence("c", "a", 0, primer) + sentence("c", "b", 1, second));
  s.data = build_that_dataset(s.corpus, lex);
  REQUIRE(s.data.instances.size() == 1);
  FrequencyModel freq(lex, s.corpus);
  s.controls = control_variables(s.data.instances[0], s.corpus.conversations.at("c"), lex, s.data.history.at("c"),
                                 freq);
  return s;
}

}  // namespace

TEST_CASE("subject form classes") {
  Token t;
  t.form = "I";
  t.upos = "PRON";
  CHECK(classify_subject_form(t) == SubjectForm::I);
  t.form = "You";
  CHECK(classify_subject_form(t) == SubjectForm::You);
  t.form = "they";
  CHECK(classify_subject_form(t) == SubjectForm::OtherPronoun);
  t.form = "boss";
  t.upos = "NOUN";
  CHECK(classify_subject_form(t) == SubjectForm::OtherNoun);
}

TEST_CASE("linguistic features of a hand-parsed sentence") {
  const auto lex = lexicon();
  auto corpus = parse_conllu_string(sentence(
      "c", "a", 0,
      {"The the DET 2 det", "boss boss NOUN 3 nsubj", "complained complain VERB 0 root", "that that SCONJ 7 mark",
       "they they PRON 7 nsubj", "were be AUX 7 cop", "crazy crazy ADJ 3 ccomp"}));
  auto ts = extract_training_instances(corpus, lex);
  REQUIRE(ts.instances.size() == 1);
  auto sub = subcat_from_counts({{"complain", 423, 53}, {"think", 46610, 35080}});
  FrequencyModel freq(lex, corpus);
  const auto& u = find_utterance(corpus, ts.instances[0].id);
  auto f = linguistic_features(ts.instances[0], u, lex, sub, freq);
  CHECK(f.subject_form == SubjectForm::OtherNoun);
  CHECK(f.tense == Tense::Inflected);
  CHECK(f.position == 3);
  CHECK_FALSE(f.factivity);
  CHECK(f.subcat_probability == doctest::Approx(53.0 / 423.0));
  // Out-of-lexicon words use the smoothed corpus rate.
  CHECK(f.verb_log_frequency == doctest::Approx(std::log10(2.0 * 1e6 / 7.0)));

  auto missing = subcat_from_counts({{"think", 1, 1}});
  CHECK_THROWS_AS(linguistic_features(ts.instances[0], u, lex, missing, freq), DataError);
}

TEST_CASE("think with the subcategorization table and know as factive") {
  const auto lex = lexicon();
  auto corpus = parse_conllu_string(sentence("c", "a", 0, i_think_he_left()) +
                                    sentence("c", "a", 1, {"I I PRON 2 nsubj", "know know VERB 0 root",
                                                           "it it PRON 2 obj"}));
  auto ts = extract_training_instances(corpus, lex);
  REQUIRE(ts.instances.size() == 2);
  auto sub = subcat_from_counts({{"think", 46610, 35080}, {"know", 119678, 28664}});
  FrequencyModel freq(lex, corpus);
  auto think = linguistic_features(ts.instances[0], find_utterance(corpus, ts.instances[0].id), lex, sub, freq);
  CHECK(think.subcat_probability == doctest::Approx(0.7526).epsilon(1e-4));
  CHECK(think.tense == Tense::Base);
  CHECK(think.verb_log_frequency == 3.42);
  auto know = linguistic_features(ts.instances[1], find_utterance(corpus, ts.instances[1].id), lex, sub, freq);
  CHECK(know.factivity);
}

TEST_CASE("co-referential subjects") {
  auto s = controls_for({"I I PRON 2 nsubj", "think think VERB 0 root", "I I PRON 5 nsubj", "can can AUX 5 aux",
                         "go go VERB 2 ccomp"});
  CHECK(s.controls.co_referentiality);
  CHECK(s.controls.matrix_subject_form == SubjectForm::I);
  CHECK(s.controls.cc_subject_form == SubjectForm::I);
  CHECK(s.controls.verb_cc_distance == Distance::Local);
  CHECK(s.controls.cc_subject_length == 0);
  CHECK(s.controls.cc_remainder_length == 2);
}

TEST_CASE("that-doubling, previous that, and distance") {
  // I said that that car is mine
  auto s = controls_for({"I I PRON 2 nsubj", "said say VERB 0 root", "that that SCONJ 7 mark", "that that DET 5 det",
                         "car car NOUN 7 nsubj", "is be AUX 7 cop", "mine mine PRON 2 ccomp"},
                        true);
  CHECK(s.controls.that_doubling);
  CHECK(s.controls.previous_that);
  CHECK(s.controls.verb_cc_distance == Distance::Local);
  CHECK(s.controls.cc_subject_length == 1);
  CHECK_FALSE(s.controls.co_referentiality);
}

TEST_CASE("filled pause and repetition before the CC") {
  auto s = controls_for({"I I PRON 3 nsubj", "uh uh INTJ 3 discourse", "think think VERB 0 root",
                         "she she PRON 5 nsubj", "left leave VERB 3 ccomp"});
  CHECK(s.controls.filled_word);
  CHECK_FALSE(s.controls.repetition);
  CHECK_FALSE(s.controls.previous_that);

  auto r = controls_for({"I I PRON 2 reparandum", "I I PRON 3 nsubj", "think think VERB 0 root",
                         "really really ADV 3 advmod", "she she PRON 6 nsubj", "left leave VERB 3 ccomp"});
  CHECK(r.controls.repetition);
  CHECK_FALSE(r.controls.filled_word);
  CHECK(r.controls.verb_cc_distance == Distance::Nonlocal);
  CHECK(r.controls.verb_id == 1);
}

TEST_CASE("first CC reaching control_variables is a logic error") {
  const auto lex = lexicon();
  auto corpus = parse_conllu_string(sentence("c", "a", 0, i_think_he_left()));
  auto d = build_that_dataset(corpus, lex);
  ThatInstance inst;
  inst.id = {"c", 0, 2};
  inst.cc = d.history.at("c")[0].cc;
  inst.matrix_subject_index = 1;
  FrequencyModel freq(lex, corpus);
  CHECK_THROWS_AS(control_variables(inst, corpus.conversations.at("c"), lex, d.history.at("c"), freq),
                  std::logic_error);
}

TEST_CASE("standardize uses the population sd") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  auto s = standardize({"a"}, x);
  CHECK(s.values(0, 0) == doctest::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(s.values(1, 0) == doctest::Approx(0.0));
  CHECK(s.values(2, 0) == doctest::Approx(1.224744871391589).epsilon(1e-12));
  CHECK(s.stats[0].sd == doctest::Approx(std::sqrt(2.0 / 3.0)));
  auto again = standardize({"a"}, s.values);
  CHECK((again.values - s.values).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.inverse(s.values) - x).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(4, 1, 2.0);
  try {
    standardize({"flat"}, c);
    FAIL("expected an error");
  } catch (const DegenerateColumnError& e) {
    CHECK(e.column() == "flat");
  }
}

TEST_CASE("binary codes and unseen levels") {
  DataTable d;
  d.rows = 4;
  d.add("f", std::vector<std::string>{"present", "absent", "present", "absent"});
  TermSpec t{"F", "f", TermKind::Binary, {"present", "absent"}};
  auto dm = encode(d, {t});
  REQUIRE(dm.cols() == 2);
  CHECK(dm.column_names[0] == "(Intercept)");
  CHECK(dm.values(0, 1) == 0.5);
  CHECK(dm.values(1, 1) == -0.5);
  CHECK(dm.term_columns.at("F") == std::vector<int>{1});

  DataTable bad;
  bad.rows = 2;
  bad.add("f", std::vector<std::string>{"present", "maybe"});
  CHECK_THROWS_AS(encode(bad, {t}), CodingError);
}

TEST_CASE("successive-difference coefficients are adjacent level differences") {
  const auto c = successive_difference_contrasts(4);
  CHECK(c.rows() == 4);
  CHECK(c.cols() == 3);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(c.col(j).sum()) < 1e-12);

  // Balanced 4-level regression, solved independently with a QR of the
  // coded design.
  const std::vector<std::string> levels{"I", "You", "OtherPronoun", "OtherNoun"};
  const double means[] = {0.3, -1.1, 2.4, 0.9};
  DataTable d;
  std::vector<std::string> lab;
  std::vector<double> y;
  for (int rep = 0; rep < 5; ++rep)
    for (int l = 0; l < 4; ++l) {
      lab.push_back(levels[static_cast<std::size_t>(l)]);
      y.push_back(means[l] + (rep - 2) * 0.01 * (l + 1));
    }
  d.rows = lab.size();
  d.add("form", lab);
  auto dm = encode(d, {{"Form", "form", TermKind::SuccessiveDifference, levels}});
  REQUIRE(dm.cols() == 4);
  CHECK(dm.column_names[1] == "Form 2-1");
  Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd b = dm.values.colPivHouseholderQr().solve(yv);
  // Per-level sample means (noise sums to zero within each level).
  for (int j = 0; j < 3; ++j) CHECK(std::abs(b(j + 1) - (means[j + 1] - means[j])) < 1e-10);
  CHECK(std::abs(b(0) - (means[0] + means[1] + means[2] + means[3]) / 4) < 1e-10);
}

TEST_CASE("distributions report levels and moments") {
  DataTable d;
  d.rows = 4;
  d.add("x", std::vector<double>{1, 2, 3, 6});
  d.add("f", std::vector<std::string>{"present", "absent", "absent", "absent"});
  auto dist = distributions(d, {{"X", "x", TermKind::Continuous, {}}, {"F", "f", TermKind::Binary, {"present", "absent"}}});
  REQUIRE(dist.size() == 2);
  CHECK(dist[0].mean == 3.0);
  CHECK(dist[0].sd == doctest::Approx(std::sqrt(3.5)));
  CHECK(dist[1].levels[0].percent == 25.0);
  CHECK(dist[1].type == "Binary");
}

TEST_CASE("selecting terms keeps the intercept") {
  DataTable d;
  d.rows = 3;
  d.add("a", std::vector<double>{1, 2, 4});
  d.add("b", std::vector<double>{0, 5, 1});
  auto dm = encode(d, {{"A", "a", TermKind::Continuous, {}}, {"B", "b", TermKind::Continuous, {}}});
  auto only_b = dm.select_terms({"B"});
  CHECK(only_b.column_names == std::vector<std::string>{"(Intercept)", "B"});
  CHECK(only_b.term_columns.at("B") == std::vector<int>{1});
  CHECK(dm.standardization.at("A").mean == doctest::Approx(7.0 / 3.0));
}

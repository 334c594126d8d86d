#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../support/conllu.hpp"
#include "uidpipe/cc_extract.hpp"
#include "uidpipe/corpus.hpp"
#include "uidpipe/error.hpp"
#include "uidpipe/lexicon.hpp"

using namespace uidpipe;
using uidpipe::testing::i_think_he_left;
using uidpipe::testing::sentence;
using uidpipe::testing::utterance;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  auto dir = std::filesystem::temp_directory_path() / "uidpipe_unit";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::ofstream(p) << contents;
  return p;
}

Lexicons lexicon(std::initializer_list<const char*> verbs) {
  Lexicons lex;
  for (auto v : verbs) lex.matrix_verbs.insert(v);
  lex.filled_pauses = {"uh", "um"};
  return lex;
}

}  // namespace

TEST_CASE("two-token sentence parses with the right root") {
  auto c = parse_conllu_string(sentence("c1", "A", 0, {"I I PRON 2 nsubj", "slept sleep VERB 0 root"}));
  REQUIRE(c.utterance_count() == 1);
  const auto& u = c.conversations.at("c1").front();
  CHECK(u.root_index() == 2);
  CHECK(u.speaker_id == "A");
}

TEST_CASE("malformed lines carry their line number") {
  const std::string text =
      "# conversation_id = c\n# speaker = s\n# utterance_index = 0\n"
      "1\tI\tI\tPRON\t_\t_\t2\tnsubj\t_\n";
  try {
    parse_conllu_string(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("structural and metadata errors") {
  CHECK_THROWS_AS(parse_conllu_string(sentence("c", "s", 0, {"I I PRON 7 nsubj", "slept sleep VERB 0 root"})),
                  StructuralError);
  CHECK_THROWS_AS(parse_conllu_string("# speaker = s\n# utterance_index = 0\n1\tI\tI\tPRON\t_\t_\t0\troot\t_\t_\n\n"),
                  MetadataError);
}

TEST_CASE("three conversations of four utterances") {
  std::string text;
  for (int c = 0; c < 3; ++c)
    for (int u = 0; u < 4; ++u)
      text += sentence("conv" + std::to_string(c), "spk" + std::to_string(c) + (u % 2 ? "b" : "a"), u,
                       {"yeah yeah INTJ 0 root"});
  auto corpus = parse_conllu_string(text);
  CHECK(corpus.conversations.size() == 3);
  CHECK(corpus.utterance_count() == 12);
  for (const auto& [id, conv] : corpus.conversations)
    for (const auto& u : conv) CHECK(u.speaker_id == "spk" + id.substr(4) + (u.utterance_index % 2 ? "b" : "a"));
}

TEST_CASE("multiword ranges and empty nodes are skipped; output round-trips") {
  std::string text =
      "# conversation_id = c\n# speaker = s\n# utterance_index = 0\n"
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n"
      "2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_\n"
      "3\tknow\tknow\tVERB\t_\t_\t0\troot\t_\t_\n"
      "3.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n\n";
  auto c = parse_conllu_string(text);
  CHECK(c.token_count() == 3);
  CHECK(parse_conllu_string(to_conllu_string(c)) == c);
}

TEST_CASE("utterances are ordered by index regardless of file order") {
  auto c = parse_conllu_string(sentence("c", "s", 1, {"b b X 0 root"}) + sentence("c", "s", 0, {"a a X 0 root"}));
  CHECK(c.conversations.at("c")[0].tokens[0].form == "a");
}

TEST_CASE("children with and without a relation filter") {
  auto u = utterance(i_think_he_left());
  auto cc = children(u, 2, "ccomp");
  REQUIRE(cc.size() == 1);
  CHECK(cc[0].form == "left");
  CHECK(children(u, 1).empty());
  CHECK(children(u, 2, "obj").empty());
  CHECK(children(u, 2).size() == 3);
  CHECK_THROWS_AS(children(u, 9), ArgumentError);
  CHECK(subtree(u, 4) == std::vector<int>{3, 4});
}

TEST_CASE("lexicon loading") {
  std::string verbs;
  for (int i = 0; i < 50; ++i) verbs += "verb" + std::to_string(i) + "\n";
  LexiconPaths p;
  p.verbs = temp_file("verbs.txt", verbs).string();
  p.frequency = temp_file("freq.tsv", "think\t3.42\n").string();
  p.factivity = temp_file("fact.tsv", "know\t1\nthink\t0\n").string();
  auto lex = load_lexicons(p);
  CHECK(lex.matrix_verbs.size() == 50);
  CHECK(lex.log_frequency.at("think") == 3.42);
  CHECK(lex.is_factive("know"));
  CHECK_FALSE(lex.is_factive("think"));
  CHECK(lex.filled_pauses == default_filled_pauses());

  p.verbs = temp_file("empty.txt", "").string();
  CHECK_THROWS_AS(load_lexicons(p), ConfigError);
  p.verbs = (std::filesystem::temp_directory_path() / "uidpipe_unit" / "absent.txt").string();
  CHECK_THROWS_AS(load_lexicons(p), ConfigError);
  p.verbs = temp_file("verbs.txt", verbs).string();
  p.frequency = temp_file("dup.tsv", "think\t3.42\nthink\t2.0\n").string();
  CHECK_THROWS_AS(load_lexicons(p), DataError);
}

TEST_CASE("complement clause detection") {
  // The boss complained (that) they were crazy
  auto with = utterance({"The the DET 2 det", "boss boss NOUN 3 nsubj", "complained complain VERB 0 root",
                         "that that SCONJ 7 mark", "they they PRON 7 nsubj", "were be AUX 7 cop",
                         "crazy crazy ADJ 3 ccomp"});
  auto cc = detect_cc(with, 3);
  REQUIRE(cc);
  CHECK(cc->that_present);
  CHECK(cc->complementizer_index == 4);
  CHECK(cc->cc_subject_index == 5);
  CHECK(cc->onset_index == 5);

  auto without = utterance({"The the DET 2 det", "boss boss NOUN 3 nsubj", "complained complain VERB 0 root",
                            "they they PRON 6 nsubj", "were be AUX 6 cop", "crazy crazy ADJ 3 ccomp"});
  cc = detect_cc(without, 3);
  REQUIRE(cc);
  CHECK_FALSE(cc->that_present);

  auto took = utterance({"I I PRON 2 nsubj", "took take VERB 0 root", "the the DET 4 det", "book book NOUN 2 obj"});
  CHECK_FALSE(detect_cc(took, 2));
}

TEST_CASE("matrix subject falls back to an expletive") {
  auto u = utterance({"it it PRON 2 expl", "seems seem VERB 0 root", "he he PRON 4 nsubj", "left leave VERB 2 ccomp"});
  CHECK(matrix_subject(u, 2) == 1);
  auto imp = utterance({"Know know VERB 0 root", "that that SCONJ 4 mark", "she she PRON 4 nsubj",
                        "left leave VERB 1 ccomp"});
  CHECK_FALSE(matrix_subject(imp, 1));
}

TEST_CASE("training instances: exclusions and labels") {
  const auto lex = lexicon({"think", "know", "take", "say"});
  std::string text;
  // Ten qualifying tokens, four with a following CC.
  text += sentence("c", "a", 0, i_think_he_left());
  text += sentence("c", "b", 1, {"you you PRON 2 nsubj", "know know VERB 0 root", "that that SCONJ 5 mark",
                                 "she she PRON 5 nsubj", "won win VERB 2 ccomp"});
  text += sentence("c", "a", 2, {"we we PRON 2 nsubj", "said say VERB 0 root", "it it PRON 4 nsubj",
                                 "rained rain VERB 2 ccomp"});
  text += sentence("c", "b", 3, {"they they PRON 2 nsubj", "thought think VERB 0 root", "so so ADV 2 advmod",
                                 "she she PRON 5 nsubj", "moved move VERB 2 ccomp"});
  for (int i = 4; i < 10; ++i)
    text += sentence("c", "a", i, {"I I PRON 2 nsubj", "took take VERB 0 root", "it it PRON 2 obj"});
  // Excluded: sentence-final think, missing subject, non-verbal homograph.
  text += sentence("c", "b", 10, {"that that PRON 3 nsubj", "'s be AUX 3 cop", "what what PRON 0 root",
                                  "I I PRON 5 nsubj", "think think VERB 3 acl:relcl", ". . PUNCT 3 punct"});
  text += sentence("c", "a", 11, {"Know know VERB 0 root", "that that SCONJ 4 mark", "she she PRON 4 nsubj",
                                  "left leave VERB 1 ccomp"});
  text += sentence("c", "b", 12, {"a a DET 2 det", "think think NOUN 0 root"});
  const auto ts = extract_training_instances(parse_conllu_string(text), lex);
  CHECK(ts.instances.size() == 10);
  int positive = 0;
  for (const auto& i : ts.instances) positive += i.label;
  CHECK(positive == 4);
  CHECK(ts.audit.count("sentence_final") == 1);
  CHECK(ts.audit.count("missing_matrix_subject") == 1);
  CHECK(ts.audit.count("non_verbal_homograph") == 1);
  CHECK(ts.audit.candidates == 13);
  CHECK(ts.audit.retained + ts.audit.total_excluded() == ts.audit.candidates);
}

TEST_CASE("instance ids round-trip") {
  InstanceId id{"conv:7", 3, 2};
  CHECK(InstanceId::parse(id.str()) == id);
  CHECK_THROWS_AS(InstanceId::parse("nope"), DataError);
}

TEST_CASE("subcategorization arithmetic") {
  auto t = subcat_from_counts({{"know", 119678, 28664}, {"think", 46610, 35080}});
  CHECK(SubcatTable::percentage(t.rows.at("know")) == "23.95");
  CHECK(SubcatTable::percentage(t.rows.at("think")) == "75.26");
  CHECK(t.probability("think").value() == doctest::Approx(0.7526).epsilon(1e-4));
  CHECK_FALSE(t.probability("zzz"));

  std::vector<TrainingInstance> all_cc(3);
  for (auto& i : all_cc) {
    i.verb_lemma = "hope";
    i.label = 1;
  }
  CHECK(subcat_probabilities(all_cc).probability("hope") == 1.0);
  CHECK_THROWS_AS(subcat_from_counts({{"x", 1, 2}}), DataError);
  CHECK_THROWS_AS(subcat_probabilities({}), ArgumentError);

  auto p = temp_file("counts.tsv", "lemma\ttotal\tcc\nknow\t119,678\t28,664\n");
  CHECK(SubcatTable::percentage(load_subcat_counts(p.string()).rows.at("know")) == "23.95");
  CHECK_THROWS_AS(load_subcat_counts(temp_file("bad.tsv", "know\tx\t1\n").string()), DataError);
}

TEST_CASE("that-dataset exclusion rules") {
  const auto lex = lexicon({"think"});
  SUBCASE("a conversation whose only CC is its first contributes nothing") {
    auto d = build_that_dataset(parse_conllu_string(sentence("c", "a", 0, i_think_he_left())), lex);
    CHECK(d.instances.empty());
    CHECK(d.audit.count("first_cc_in_conversation") == 1);
    CHECK(d.history.at("c").size() == 1);
  }
  SUBCASE("one verb with two CCs keeps the leftmost") {
    // I think it 's fine and that we should go
    std::string text = sentence("c", "a", 0, i_think_he_left());
    text += sentence("c", "b", 1,
                     {"I I PRON 2 nsubj", "think think VERB 0 root", "it it PRON 5 nsubj", "'s be AUX 5 cop",
                      "fine fine ADJ 2 ccomp", "and and CCONJ 10 cc", "that that SCONJ 10 mark",
                      "we we PRON 10 nsubj", "should should AUX 10 aux", "go go VERB 2 ccomp"});
    auto d = build_that_dataset(parse_conllu_string(text), lex);
    REQUIRE(d.instances.size() == 1);
    CHECK_FALSE(d.instances[0].that_present);
    CHECK(d.instances[0].cc.cc_head_index == 5);
    CHECK(d.audit.count("additional_cc_of_verb") == 1);
  }
  SUBCASE("a CC without a subject is excluded") {
    std::string text = sentence("c", "a", 0, i_think_he_left());
    text += sentence("c", "b", 1, {"I I PRON 2 nsubj", "think think VERB 0 root", "raining rain VERB 2 ccomp"});
    auto d = build_that_dataset(parse_conllu_string(text), lex);
    CHECK(d.instances.empty());
    CHECK(d.audit.count("missing_subject") == 1);
  }
}

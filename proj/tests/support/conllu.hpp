#pragma once

// Compact CoNLL-U builder for tests: each token is "form lemma UPOS head deprel"
// with optional "|Feats" glued onto the deprel, e.g. "left leave VERB 2 ccomp".

#include <sstream>
#include <string>
#include <vector>

#include "uidpipe/corpus.hpp"

namespace uidpipe::testing {

inline std::string sentence(const std::string& conv, const std::string& speaker, int index,
                            const std::vector<std::string>& tokens) {
  std::ostringstream out;
  out << "# conversation_id = " << conv << "\n# speaker = " << speaker << "\n# utterance_index = " << index << "\n";
  int i = 1;
  for (const auto& t : tokens) {
    std::istringstream in(t);
    std::string form, lemma, upos, head, deprel;
    in >> form >> lemma >> upos >> head >> deprel;
    std::string feats = "_";
    if (auto bar = deprel.find('|'); bar != std::string::npos) {
      feats = deprel.substr(bar + 1);
      deprel = deprel.substr(0, bar);
    }
    out << i++ << '\t' << form << '\t' << lemma << '\t' << upos << "\t_\t" << feats << '\t' << head << '\t' << deprel
        << "\t_\t_\n";
  }
  out << "\n";
  return out.str();
}

inline Utterance utterance(const std::vector<std::string>& tokens) {
  const Corpus c = parse_conllu_string(sentence("c", "s", 0, tokens));
  return c.conversations.begin()->second.front();
}

// "I think he left ."
inline std::vector<std::string> i_think_he_left() {
  return {"I I PRON 2 nsubj", "think think VERB 0 root", "he he PRON 4 nsubj", "left leave VERB 2 ccomp",
          ". . PUNCT 2 punct"};
}

}  // namespace uidpipe::testing

#include "uidpipe/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "uidpipe/error.hpp"

namespace uidpipe {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string Token::lower_form() const { return to_lower(form); }
std::string Token::lower_lemma() const { return to_lower(lemma); }

std::optional<std::string> Token::feat(std::string_view key) const {
  auto it = feats.find(std::string(key));
  if (it == feats.end()) return std::nullopt;
  return it->second;
}

const Token& Utterance::at(int index) const {
  if (index < 1 || index > size()) {
    throw ArgumentError("token index " + std::to_string(index) + " outside 1.." +
                        std::to_string(size()));
  }
  return tokens[static_cast<std::size_t>(index - 1)];
}

int Utterance::root_index() const {
  for (const auto& t : tokens)
    if (t.head == 0) return t.index;
  return 0;
}

std::size_t Corpus::utterance_count() const {
  std::size_t n = 0;
  for (const auto& [id, conv] : conversations) n += conv.size();
  return n;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& [id, conv] : conversations)
    for (const auto& u : conv) n += u.tokens.size();
  return n;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string describe(const Utterance& u) {
  return "conversation '" + u.conversation_id + "' utterance " +
         std::to_string(u.utterance_index);
}

std::map<std::string, std::string> parse_feats(std::string_view field, std::size_t line) {
  std::map<std::string, std::string> feats;
  if (field == "_" || field.empty()) return feats;
  for (auto item : split(field, '|')) {
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError(line, "malformed FEATS item '" + std::string(item) + "'");
    }
    feats.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
  }
  return feats;
}

std::string format_feats(const std::map<std::string, std::string>& feats) {
  if (feats.empty()) return "_";
  std::string out;
  for (const auto& [k, v] : feats) {
    if (!out.empty()) out += '|';
    out += k + "=" + v;
  }
  return out;
}

struct PendingSentence {
  std::optional<std::string> conversation_id;
  std::optional<std::string> speaker;
  std::optional<int> utterance_index;
  std::vector<Token> tokens;
  std::size_t first_line = 0;

  bool empty() const {
    return tokens.empty() && !conversation_id && !speaker && !utterance_index;
  }
};

class Parser {
 public:
  void feed(std::string_view raw, std::size_t line_no) {
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (trim(raw).empty()) {
      flush();
      return;
    }
    if (pending_.first_line == 0) pending_.first_line = line_no;
    if (raw.front() == '#') {
      comment(raw.substr(1), line_no);
      return;
    }
    token_line(raw, line_no);
  }

  Corpus finish() {
    flush();
    Corpus corpus;
    for (auto& u : utterances_) {
      corpus.conversations[u.conversation_id].push_back(std::move(u));
    }
    for (auto& [id, conv] : corpus.conversations) {
      std::sort(conv.begin(), conv.end(), [](const Utterance& a, const Utterance& b) {
        return a.utterance_index < b.utterance_index;
      });
      for (std::size_t i = 1; i < conv.size(); ++i) {
        if (conv[i].utterance_index == conv[i - 1].utterance_index) {
          throw StructuralError("duplicate " + describe(conv[i]));
        }
      }
    }
    return corpus;
  }

 private:
  void comment(std::string_view body, std::size_t line_no) {
    auto eq = body.find('=');
    if (eq == std::string_view::npos) return;
    auto key = trim(body.substr(0, eq));
    auto value = std::string(trim(body.substr(eq + 1)));
    if (key == "conversation_id") {
      pending_.conversation_id = value;
    } else if (key == "speaker") {
      pending_.speaker = value;
    } else if (key == "utterance_index") {
      auto idx = parse_int(value);
      if (!idx || *idx < 0) {
        throw MetadataError("line " + std::to_string(line_no) + ": utterance_index '" + value +
                            "' is not a non-negative integer");
      }
      pending_.utterance_index = *idx;
    }
  }

  void token_line(std::string_view raw, std::size_t line_no) {
    auto cols = split(raw, '\t');
    if (cols.size() != 10) {
      throw ParseError(line_no,
                       "expected 10 tab-separated columns, found " + std::to_string(cols.size()));
    }
    // Multiword ranges and empty nodes carry no head of their own.
    if (cols[0].find('-') != std::string_view::npos ||
        cols[0].find('.') != std::string_view::npos) {
      return;
    }
    Token t;
    auto id = parse_int(cols[0]);
    if (!id) throw ParseError(line_no, "bad token id '" + std::string(cols[0]) + "'");
    auto head = parse_int(cols[6]);
    if (!head) throw ParseError(line_no, "bad head '" + std::string(cols[6]) + "'");
    t.index = *id;
    t.form = cols[1];
    t.lemma = cols[2];
    t.upos = cols[3];
    t.xpos = cols[4];
    t.feats = parse_feats(cols[5], line_no);
    t.head = *head;
    t.deprel = cols[7];
    t.deps = cols[8];
    t.misc = cols[9];
    pending_.tokens.push_back(std::move(t));
  }

  void flush() {
    if (pending_.empty()) {
      pending_ = {};
      return;
    }
    if (pending_.tokens.empty()) {
      // Comments with no sentence (e.g. a file-level header) are ignored.
      pending_ = {};
      return;
    }
    auto where = "sentence starting at line " + std::to_string(pending_.first_line);
    if (!pending_.conversation_id) throw MetadataError(where + ": missing conversation_id");
    if (!pending_.speaker) throw MetadataError(where + ": missing speaker");
    if (!pending_.utterance_index) throw MetadataError(where + ": missing utterance_index");
    Utterance u;
    u.conversation_id = *pending_.conversation_id;
    u.speaker_id = *pending_.speaker;
    u.utterance_index = *pending_.utterance_index;
    u.tokens = std::move(pending_.tokens);
    validate_utterance(u);
    utterances_.push_back(std::move(u));
    pending_ = {};
  }

  PendingSentence pending_;
  std::vector<Utterance> utterances_;
};

}  // namespace

void validate_utterance(const Utterance& u) {
  const int n = u.size();
  if (n == 0) throw StructuralError(describe(u) + " has no tokens");
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const auto& t = u.tokens[static_cast<std::size_t>(i)];
    if (t.index != i + 1) {
      throw StructuralError(describe(u) + ": token ids are not contiguous from 1");
    }
    if (t.head < 0 || t.head > n) {
      throw StructuralError(describe(u) + ": head " + std::to_string(t.head) + " of token " +
                            std::to_string(t.index) + " out of range");
    }
    if (t.head == t.index) {
      throw StructuralError(describe(u) + ": token " + std::to_string(t.index) +
                            " is its own head");
    }
    if (t.head == 0) ++roots;
  }
  if (roots != 1) {
    throw StructuralError(describe(u) + ": expected exactly one root, found " +
                          std::to_string(roots));
  }
}

Corpus parse_conllu(std::istream& in) {
  Parser parser;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) parser.feed(line, ++line_no);
  return parser.finish();
}

Corpus parse_conllu_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_conllu(in);
}

Corpus parse_conllu_files(const std::vector<std::string>& paths) {
  std::vector<std::string> sorted = paths;
  std::sort(sorted.begin(), sorted.end());
  Corpus merged;
  for (const auto& path : sorted) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open corpus file '" + path + "'");
    Corpus part;
    try {
      part = parse_conllu(in);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), path + ": " + e.what());
    }
    for (auto& [id, conv] : part.conversations) {
      auto& dest = merged.conversations[id];
      dest.insert(dest.end(), std::make_move_iterator(conv.begin()),
                  std::make_move_iterator(conv.end()));
    }
  }
  for (auto& [id, conv] : merged.conversations) {
    std::stable_sort(conv.begin(), conv.end(), [](const Utterance& a, const Utterance& b) {
      return a.utterance_index < b.utterance_index;
    });
    for (std::size_t i = 1; i < conv.size(); ++i) {
      if (conv[i].utterance_index == conv[i - 1].utterance_index) {
        throw StructuralError("duplicate " + describe(conv[i]));
      }
    }
  }
  return merged;
}

void write_conllu(std::ostream& out, const Corpus& corpus) {
  for (const auto& [id, conv] : corpus.conversations) {
    for (const auto& u : conv) {
      out << "# conversation_id = " << u.conversation_id << '\n'
          << "# speaker = " << u.speaker_id << '\n'
          << "# utterance_index = " << u.utterance_index << '\n';
      for (const auto& t : u.tokens) {
        out << t.index << '\t' << t.form << '\t' << t.lemma << '\t' << t.upos << '\t' << t.xpos
            << '\t' << format_feats(t.feats) << '\t' << t.head << '\t' << t.deprel << '\t'
            << t.deps << '\t' << t.misc << '\n';
      }
      out << '\n';
    }
  }
}

std::string to_conllu_string(const Corpus& corpus) {
  std::ostringstream out;
  write_conllu(out, corpus);
  return out.str();
}

std::vector<Token> children(const Utterance& u, int head_index,
                            std::optional<std::string_view> relation) {
  if (head_index < 0 || head_index > u.size()) {
    throw ArgumentError("head index " + std::to_string(head_index) + " outside 0.." +
                        std::to_string(u.size()));
  }
  std::vector<Token> out;
  for (const auto& t : u.tokens) {
    if (t.head != head_index) continue;
    if (relation && t.deprel != *relation) continue;
    out.push_back(t);
  }
  return out;
}

std::vector<int> subtree(const Utterance& u, int head_index) {
  u.at(head_index);
  std::vector<bool> in(static_cast<std::size_t>(u.size() + 1), false);
  in[static_cast<std::size_t>(head_index)] = true;
  // Heads form a tree, so repeated passes converge in at most depth steps.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& t : u.tokens) {
      auto i = static_cast<std::size_t>(t.index);
      if (!in[i] && t.head != 0 && in[static_cast<std::size_t>(t.head)]) {
        in[i] = true;
        changed = true;
      }
    }
  }
  std::vector<int> out;
  for (int i = 1; i <= u.size(); ++i)
    if (in[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

}  // namespace uidpipe

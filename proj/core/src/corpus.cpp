#include "dsm/corpus.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dsm/error.hpp"

namespace dsm {

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::kUD ? "UD" : "SUD";
}

Scheme scheme_from_string(std::string_view s) {
  if (s == "UD" || s == "ud") return Scheme::kUD;
  if (s == "SUD" || s == "sud") return Scheme::kSUD;
  throw ConfigError("unknown annotation scheme '" + std::string(s) + "'");
}

std::vector<std::string> Sentence::words() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.form);
  return out;
}

std::vector<std::string> Sentence::upos() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.upos);
  return out;
}

std::string Sentence::text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.form;
  }
  return out;
}

GoldTree gold_tree(const Sentence& sentence, Scheme scheme) {
  GoldTree tree;
  tree.scheme = scheme;
  for (const auto& t : sentence.tokens) {
    if (t.head == kRootHead) {
      tree.root = t.index;
      tree.root_label = t.deprel;
    } else if (t.head >= 0) {
      tree.arcs.push_back({static_cast<std::size_t>(t.head), t.index, t.deprel});
    }
  }
  return tree;
}

bool is_well_formed_tree(const Sentence& sentence) {
  const std::size_t n = sentence.size();
  std::size_t roots = 0;
  for (const auto& t : sentence.tokens) {
    if (t.head == kRootHead) {
      ++roots;
    } else if (t.head < 0 || static_cast<std::size_t>(t.head) >= n) {
      return false;
    }
  }
  if (roots != 1) return false;
  // Every word must reach the root within n steps.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i;
    std::size_t steps = 0;
    while (sentence.tokens[cur].head != kRootHead) {
      cur = static_cast<std::size_t>(sentence.tokens[cur].head);
      if (++steps > n) return false;
    }
  }
  return true;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool parse_int(std::string_view s, long& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

class ConlluReader {
 public:
  ConlluResult run(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) {
        flush();
        continue;
      }
      if (line.front() == '#') {
        comment(line);
        continue;
      }
      token_line(line);
    }
    flush();
    return std::move(result_);
  }

 private:
  void comment(const std::string& line) {
    std::string_view body(line);
    body.remove_prefix(1);
    if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
    constexpr std::string_view kSentId = "sent_id";
    if (body.substr(0, kSentId.size()) == kSentId) {
      auto eq = body.find('=');
      if (eq != std::string_view::npos) {
        auto value = body.substr(eq + 1);
        while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
        current_.id = std::string(value);
        return;
      }
    }
    current_.comments.emplace_back(body);
  }

  void token_line(const std::string& line) {
    const auto fields = split_tabs(line);
    if (fields.size() < 8) {
      throw ParseError("expected at least 8 tab-separated columns, got " +
                           std::to_string(fields.size()),
                       line_no_);
    }
    const auto id = fields[0];
    if (id.find('-') != std::string_view::npos ||
        id.find('.') != std::string_view::npos) {
      return;  // multiword token range or empty node
    }
    long index = 0;
    if (!parse_int(id, index) || index < 1) {
      throw ParseError("invalid token id '" + std::string(id) + "'", line_no_);
    }
    if (static_cast<std::size_t>(index) != current_.tokens.size() + 1) {
      throw ParseError("token id " + std::to_string(index) +
                           " out of sequence",
                       line_no_);
    }
    long head = 0;
    if (!parse_int(fields[6], head) || head < 0) {
      throw ParseError("non-integer head '" + std::string(fields[6]) + "'",
                       line_no_);
    }
    Token t;
    t.index = static_cast<std::size_t>(index - 1);
    t.form = std::string(fields[1]);
    t.upos = std::string(fields[3]);
    t.head = head == 0 ? kRootHead : static_cast<int>(head - 1);
    t.deprel = std::string(fields[7]);
    t.is_punct = t.upos == "PUNCT";
    current_.tokens.push_back(std::move(t));
    head_lines_.push_back(line_no_);
  }

  void flush() {
    if (current_.tokens.empty()) {
      current_ = Sentence{};
      head_lines_.clear();
      return;
    }
    const std::size_t n = current_.tokens.size();
    for (std::size_t i = 0; i < n; ++i) {
      const int h = current_.tokens[i].head;
      if (h != kRootHead && static_cast<std::size_t>(h) >= n) {
        throw ParseError("head " + std::to_string(h + 1) +
                             " outside sentence of " + std::to_string(n) +
                             " words",
                         head_lines_[i]);
      }
    }
    if (current_.id.empty()) {
      current_.id = std::to_string(result_.sentences.size() + 1);
    }
    current_.has_gold = true;
    current_.usable = is_well_formed_tree(current_);
    if (!current_.usable) {
      result_.warnings.push_back("sentence " + current_.id +
                                 ": gold arcs do not form a single-rooted "
                                 "tree; unusable for evaluation");
    }
    result_.sentences.push_back(std::move(current_));
    current_ = Sentence{};
    head_lines_.clear();
  }

  ConlluResult result_;
  Sentence current_;
  std::vector<std::size_t> head_lines_;
  std::size_t line_no_ = 0;
};

}  // namespace

ConlluResult parse_conllu(std::istream& in) { return ConlluReader{}.run(in); }

ConlluResult parse_conllu(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_conllu(in);
}

ConlluResult read_conllu_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_conllu(in);
}

void write_conllu(std::ostream& out, const Sentence& sentence) {
  out << "# sent_id = " << sentence.id << '\n';
  for (const auto& c : sentence.comments) out << "# " << c << '\n';
  for (const auto& t : sentence.tokens) {
    const int head = t.head == kRootHead ? 0 : t.head + 1;
    out << t.index + 1 << '\t' << t.form << "\t_\t"
        << (t.upos.empty() ? "_" : t.upos) << "\t_\t_\t";
    if (t.head == kNoHead) {
      out << '_';
    } else {
      out << head;
    }
    out << '\t' << (t.deprel.empty() ? "_" : t.deprel) << "\t_\t_\n";
  }
  out << '\n';
}

std::string to_conllu(const Corpus& corpus) {
  std::ostringstream out;
  for (const auto& s : corpus) write_conllu(out, s);
  return out.str();
}

Corpus read_raw_sentences(std::istream& in) {
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    Sentence s;
    std::string w;
    while (words >> w) {
      Token t;
      t.index = s.tokens.size();
      t.form = w;
      s.tokens.push_back(std::move(t));
    }
    if (s.tokens.empty()) continue;
    s.id = std::to_string(corpus.size() + 1);
    s.has_gold = false;
    s.usable = false;
    corpus.push_back(std::move(s));
  }
  return corpus;
}

std::size_t counted_length(const Sentence& sentence, bool count_punct) {
  if (count_punct) return sentence.size();
  std::size_t n = 0;
  for (const auto& t : sentence.tokens) n += t.is_punct ? 0 : 1;
  return n;
}

Corpus filter_corpus(const Corpus& corpus, const CorpusFilter& filter) {
  if (filter.max_length && *filter.max_length < 1) {
    throw ConfigError("max_length must be at least 1");
  }
  if (!filter.max_length) return corpus;
  Corpus out;
  for (const auto& s : corpus) {
    if (counted_length(s, filter.count_punct_in_length) <= *filter.max_length) {
      out.push_back(s);
    }
  }
  return out;
}

void check_aligned(const Corpus& ud, const Corpus& sud) {
  if (ud.size() != sud.size()) {
    throw DataError("UD and SUD files differ in sentence count (" +
                    std::to_string(ud.size()) + " vs " +
                    std::to_string(sud.size()) + ")");
  }
  for (std::size_t i = 0; i < ud.size(); ++i) {
    if (ud[i].words() != sud[i].words()) {
      throw DataError("UD and SUD word forms differ at sentence " +
                      std::to_string(i + 1) + " (" + ud[i].id + ")");
    }
  }
}

}  // namespace dsm

#pragma once

// Treebank access: CoNLL-U reading/writing, raw sentence input, length
// filtering, and UD/SUD alignment.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dsm {

inline constexpr int kRootHead = -1;  // head of the root word
inline constexpr int kNoHead = -2;    // no gold annotation (raw input)

enum class Scheme { kUD, kSUD };

std::string_view to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view s);

struct Token {
  std::size_t index = 0;  // 0-based word position
  std::string form;
  std::string upos;
  int head = kNoHead;  // 0-based parent, kRootHead, or kNoHead
  std::string deprel;
  bool is_punct = false;  // upos == "PUNCT"

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  bool has_gold = false;
  // False when the gold arcs are not a single-rooted tree; such sentences are
  // kept but skipped by evaluation.
  bool usable = true;
  // Comment lines other than sent_id, without the leading "# ".
  std::vector<std::string> comments;

  std::size_t size() const noexcept { return tokens.size(); }
  std::vector<std::string> words() const;
  std::vector<std::string> upos() const;
  std::string text() const;  // words joined by single spaces

  bool operator==(const Sentence&) const = default;
};

using Corpus = std::vector<Sentence>;

struct GoldArc {
  std::size_t head = 0;
  std::size_t dep = 0;
  std::string label;

  bool operator==(const GoldArc&) const = default;
};

// Word-to-word arcs of a gold annotation. The ROOT arc is kept apart in
// `root` so that `arcs` holds exactly n-1 entries for a well-formed tree.
struct GoldTree {
  std::vector<GoldArc> arcs;
  std::optional<std::size_t> root;
  std::string root_label;
  Scheme scheme = Scheme::kUD;
};

GoldTree gold_tree(const Sentence& sentence, Scheme scheme = Scheme::kUD);

// True when the gold heads form a single-rooted tree over all words.
bool is_well_formed_tree(const Sentence& sentence);

struct ConlluResult {
  Corpus sentences;
  std::vector<std::string> warnings;
};

// Multiword-token ranges ("3-4") and empty nodes ("5.1") are skipped. Throws
// ParseError with the offending line number on malformed input. A sentence
// whose gold arcs contain a cycle or several roots produces a warning and is
// marked unusable.
ConlluResult parse_conllu(std::istream& in);
ConlluResult parse_conllu(std::string_view text);
ConlluResult read_conllu_file(const std::string& path);

// Retained columns only: ID FORM UPOS HEAD DEPREL; others are written as "_".
void write_conllu(std::ostream& out, const Sentence& sentence);
std::string to_conllu(const Corpus& corpus);

// One sentence per line, whitespace tokenized, no gold annotation.
Corpus read_raw_sentences(std::istream& in);

struct CorpusFilter {
  std::optional<std::size_t> max_length;  // nullopt = unbounded
  bool count_punct_in_length = true;
};

std::size_t counted_length(const Sentence& sentence, bool count_punct);
Corpus filter_corpus(const Corpus& corpus, const CorpusFilter& filter);

// UD and SUD files annotate the same sentences in the same order. Throws
// DataError on count or word-form mismatch.
void check_aligned(const Corpus& ud, const Corpus& sud);

}  // namespace dsm

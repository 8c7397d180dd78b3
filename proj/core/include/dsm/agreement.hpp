#pragma once

// Subject-verb agreement constructions with a relative clause between the
// subject and its verb, and recall of the subject-verb edge.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsm/corpus.hpp"
#include "dsm/induction.hpp"

namespace dsm {

enum class RcKind { kObjectRc, kSubjectRc };

std::string_view to_string(RcKind kind);
RcKind rc_kind_from_string(std::string_view s);

struct NounEntry {
  std::string singular;
  std::string plural;
};

struct VerbEntry {
  std::string singular;  // 3rd person present
  std::string plural;
  bool copular = false;
};

struct AgreementVocab {
  std::vector<NounEntry> nouns;
  std::vector<VerbEntry> transitive;
  std::vector<VerbEntry> intransitive;
};

// Built-in lexicon. Copular entries are listed so that the filter is
// exercised; generation never uses them.
const AgreementVocab& default_vocab();

// One filled template. Number is true for plural.
struct AgreementFill {
  std::size_t subject = 0;
  bool subject_plural = false;
  std::size_t embedded = 0;  // must differ from subject
  bool embedded_plural = false;
  std::size_t transitive = 0;
  std::size_t main_verb = 0;  // index into the non-copular intransitives
};

struct AgreementItem {
  Sentence sentence;  // gold UD annotation included
  std::size_t subject = 0;
  std::size_t verb = 0;
};

//   object_rc:  the N1 that the N2 Vt Vi .
//   subject_rc: the N1 that Vt the N2 Vi .
AgreementItem fill_template(RcKind kind, const AgreementFill& fill,
                            const AgreementVocab& vocab = default_vocab());

// Seeded sampling without replacement over all fills; once exhausted it
// continues with replacement. Throws ConfigError when count is 0 or the
// vocabulary cannot fill the template.
std::vector<AgreementItem> generate_agreement(RcKind kind, std::size_t count,
                                              std::uint64_t seed,
                                              const AgreementVocab& vocab = default_vocab());

// True when the tree contains the {subject, verb} edge.
bool has_agreement_edge(const UndirectedTree& tree, const AgreementItem& item);

// Fraction of items whose tree contains the edge.
double agreement_recall(std::span<const UndirectedTree> trees,
                        std::span<const AgreementItem> items);

// CoNLL-U with "subject = i" and "verb = j" comments (0-based).
std::string agreement_to_conllu(std::span<const AgreementItem> items);
std::vector<AgreementItem> agreement_from_conllu(std::string_view text);

// Conditional-MI baseline recall reported alongside ours; quoted, never
// recomputed.
inline constexpr double kReferenceMiObjectRc = 8.9;
inline constexpr double kReferenceMiSubjectRc = 1.9;

}  // namespace dsm

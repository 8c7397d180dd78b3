#include "dsm/agreement.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

#include "dsm/error.hpp"

namespace dsm {

namespace {

std::vector<std::size_t> usable_intransitives(const AgreementVocab& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.intransitive.size(); ++i) {
    if (!v.intransitive[i].copular) out.push_back(i);
  }
  return out;
}

Token word(std::size_t i, std::string form, std::string upos, int head,
           std::string deprel) {
  Token t;
  t.index = i;
  t.form = std::move(form);
  t.upos = std::move(upos);
  t.head = head;
  t.deprel = std::move(deprel);
  t.is_punct = t.upos == "PUNCT";
  return t;
}

const std::string& pick(const NounEntry& n, bool plural) { return plural ? n.plural : n.singular; }
const std::string& pick(const VerbEntry& v, bool plural) { return plural ? v.plural : v.singular; }

// Uniform index in [0, n) by rejection sampling.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace

std::string_view to_string(RcKind kind) {
  return kind == RcKind::kObjectRc ? "object_rc" : "subject_rc";
}

RcKind rc_kind_from_string(std::string_view s) {
  if (s == "object_rc") return RcKind::kObjectRc;
  if (s == "subject_rc") return RcKind::kSubjectRc;
  throw ConfigError("unknown agreement kind '" + std::string(s) + "'");
}

const AgreementVocab& default_vocab() {
  static const AgreementVocab vocab{
      {{"author", "authors"},       {"pilot", "pilots"},
       {"surgeon", "surgeons"},     {"farmer", "farmers"},
       {"manager", "managers"},     {"customer", "customers"},
       {"architect", "architects"}, {"guard", "guards"},
       {"chef", "chefs"},           {"senator", "senators"},
       {"minister", "ministers"},   {"skater", "skaters"},
       {"dancer", "dancers"},       {"officer", "officers"},
       {"executive", "executives"}, {"teacher", "teachers"}},
      {{"likes", "like"}, {"admires", "admire"}, {"hates", "hate"}, {"loves", "love"}},
      {{"laughs", "laugh"},
       {"swims", "swim"},
       {"smiles", "smile"},
       {"cooks", "cook"},
       {"is", "are", true},
       {"seems", "seem", true}},
  };
  return vocab;
}

AgreementItem fill_template(RcKind kind, const AgreementFill& f, const AgreementVocab& v) {
  if (f.subject >= v.nouns.size() || f.embedded >= v.nouns.size() ||
      f.transitive >= v.transitive.size()) {
    throw DataError("agreement fill out of range");
  }
  const auto mains = usable_intransitives(v);
  if (f.main_verb >= mains.size()) throw DataError("agreement fill out of range");
  const VerbEntry& vi = v.intransitive[mains[f.main_verb]];
  const VerbEntry& vt = v.transitive[f.transitive];
  const std::string& n1 = pick(v.nouns[f.subject], f.subject_plural);
  const std::string& n2 = pick(v.nouns[f.embedded], f.embedded_plural);

  AgreementItem item;
  Sentence& s = item.sentence;
  if (kind == RcKind::kObjectRc) {
    s.tokens = {word(0, "the", "DET", 1, "det"),
                word(1, n1, "NOUN", 6, "nsubj"),
                word(2, "that", "PRON", 5, "obj"),
                word(3, "the", "DET", 4, "det"),
                word(4, n2, "NOUN", 5, "nsubj"),
                word(5, pick(vt, f.embedded_plural), "VERB", 1, "acl:relcl"),
                word(6, pick(vi, f.subject_plural), "VERB", kRootHead, "root"),
                word(7, ".", "PUNCT", 6, "punct")};
  } else {
    s.tokens = {word(0, "the", "DET", 1, "det"),
                word(1, n1, "NOUN", 6, "nsubj"),
                word(2, "that", "PRON", 3, "nsubj"),
                word(3, pick(vt, f.subject_plural), "VERB", 1, "acl:relcl"),
                word(4, "the", "DET", 5, "det"),
                word(5, n2, "NOUN", 3, "obj"),
                word(6, pick(vi, f.subject_plural), "VERB", kRootHead, "root"),
                word(7, ".", "PUNCT", 6, "punct")};
  }
  s.has_gold = true;
  s.usable = true;
  item.subject = 1;
  item.verb = 6;
  return item;
}

std::vector<AgreementItem> generate_agreement(RcKind kind, std::size_t count,
                                              std::uint64_t seed, const AgreementVocab& v) {
  if (count == 0) throw ConfigError("agreement count must be at least 1");
  const std::size_t mains = usable_intransitives(v).size();
  if (v.nouns.size() < 2 || v.transitive.empty() || mains == 0) {
    throw ConfigError("agreement vocabulary cannot fill the template");
  }
  // Fill space: subject × number × embedded(≠subject) × number × Vt × Vi.
  const std::size_t nn = v.nouns.size();
  const std::size_t space = nn * 2 * (nn - 1) * 2 * v.transitive.size() * mains;
  auto decode = [&](std::size_t code) {
    AgreementFill f;
    f.main_verb = code % mains;
    code /= mains;
    f.transitive = code % v.transitive.size();
    code /= v.transitive.size();
    f.embedded_plural = code % 2;
    code /= 2;
    std::size_t other = code % (nn - 1);
    code /= nn - 1;
    f.subject_plural = code % 2;
    code /= 2;
    f.subject = code;
    f.embedded = other < f.subject ? other : other + 1;
    return f;
  };

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> codes(space);
  for (std::size_t i = 0; i < space; ++i) codes[i] = i;
  const std::size_t distinct = std::min(count, space);
  for (std::size_t i = 0; i < distinct; ++i) {  // partial Fisher-Yates
    std::swap(codes[i], codes[i + draw(rng, space - i)]);
  }
  std::vector<AgreementItem> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t code = i < distinct ? codes[i] : draw(rng, space);
    out.push_back(fill_template(kind, decode(code), v));
    char id[32];
    std::snprintf(id, sizeof id, "%04zu", i + 1);
    out.back().sentence.id = std::string(to_string(kind)) + "-" + id;
  }
  return out;
}

bool has_agreement_edge(const UndirectedTree& tree, const AgreementItem& item) {
  const Edge want = make_edge(item.subject, item.verb);
  return std::find(tree.edges.begin(), tree.edges.end(), want) != tree.edges.end();
}

double agreement_recall(std::span<const UndirectedTree> trees,
                        std::span<const AgreementItem> items) {
  if (trees.size() != items.size()) throw DataError("tree count differs from item count");
  if (items.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < items.size(); ++i) hit += has_agreement_edge(trees[i], items[i]);
  return static_cast<double>(hit) / static_cast<double>(items.size());
}

std::string agreement_to_conllu(std::span<const AgreementItem> items) {
  std::ostringstream out;
  for (const auto& item : items) {
    Sentence s = item.sentence;
    s.comments = {"subject = " + std::to_string(item.subject),
                  "verb = " + std::to_string(item.verb)};
    write_conllu(out, s);
  }
  return out.str();
}

std::vector<AgreementItem> agreement_from_conllu(std::string_view text) {
  std::vector<AgreementItem> out;
  for (auto& s : parse_conllu(text).sentences) {
    AgreementItem item;
    bool have_subject = false, have_verb = false;
    for (const auto& c : s.comments) {
      if (c.rfind("subject = ", 0) == 0) {
        item.subject = std::stoul(c.substr(10));
        have_subject = true;
      } else if (c.rfind("verb = ", 0) == 0) {
        item.verb = std::stoul(c.substr(7));
        have_verb = true;
      }
    }
    if (!have_subject || !have_verb || item.subject >= s.size() || item.verb >= s.size()) {
      throw DataError("sentence " + s.id + ": missing or bad subject/verb comment");
    }
    item.sentence = std::move(s);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace dsm

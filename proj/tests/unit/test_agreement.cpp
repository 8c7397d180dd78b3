#include <gtest/gtest.h>

#include <set>

#include "dsm/agreement.hpp"
#include "dsm/error.hpp"

using namespace dsm;

namespace {

std::size_t noun(const std::string& singular) {
  const auto& v = default_vocab();
  for (std::size_t i = 0; i < v.nouns.size(); ++i) {
    if (v.nouns[i].singular == singular) return i;
  }
  throw std::runtime_error(singular);
}

std::size_t verb(const std::vector<VerbEntry>& list, const std::string& singular,
                 bool skip_copular) {
  std::size_t j = 0;
  for (const auto& e : list) {
    if (skip_copular && e.copular) continue;
    if (e.singular == singular) return j;
    ++j;
  }
  throw std::runtime_error(singular);
}

std::string text(const Sentence& s) {
  std::string out;
  for (const auto& t : s.tokens) out += (out.empty() ? "" : " ") + t.form;
  return out;
}

}  // namespace

TEST(Agreement, VocabularyCoversExampleWords) {
  const auto& v = default_vocab();
  std::set<std::string> words;
  for (const auto& n : v.nouns) words.insert({n.singular, n.plural});
  for (const auto& e : v.transitive) words.insert(e.singular);
  for (const auto& e : v.intransitive) words.insert(e.singular);
  for (const char* w : {"pilot", "minister", "customer", "skater", "likes", "hates", "cooks", "swims"}) {
    EXPECT_TRUE(words.count(w)) << w;
  }
}

TEST(Agreement, ObjectRelativeExample) {
  AgreementFill f;
  f.subject = noun("pilot");
  f.embedded = noun("minister");
  f.transitive = verb(default_vocab().transitive, "likes", false);
  f.main_verb = verb(default_vocab().intransitive, "cooks", true);
  const AgreementItem item = fill_template(RcKind::kObjectRc, f);
  EXPECT_EQ(text(item.sentence), "the pilot that the minister likes cooks .");
  EXPECT_EQ(item.subject, 1u);
  EXPECT_EQ(item.verb, 6u);
  EXPECT_TRUE(is_well_formed_tree(item.sentence));
  EXPECT_EQ(item.sentence.tokens[1].head, 6);
}

TEST(Agreement, SubjectRelativeExample) {
  AgreementFill f;
  f.subject = noun("customer");
  f.embedded = noun("skater");
  f.transitive = verb(default_vocab().transitive, "hates", false);
  f.main_verb = verb(default_vocab().intransitive, "swims", true);
  const AgreementItem item = fill_template(RcKind::kSubjectRc, f);
  EXPECT_EQ(text(item.sentence), "the customer that hates the skater swims .");
  EXPECT_EQ(item.subject, 1u);
  EXPECT_EQ(item.verb, 6u);
  EXPECT_TRUE(is_well_formed_tree(item.sentence));
}

TEST(Agreement, NumberAgreesWithSubject) {
  AgreementFill f;
  f.subject_plural = true;
  f.embedded = 1;
  const AgreementItem o = fill_template(RcKind::kObjectRc, f);
  EXPECT_EQ(o.sentence.tokens[1].form, default_vocab().nouns[0].plural);
  EXPECT_EQ(o.sentence.tokens[5].form, default_vocab().transitive[0].singular);
  const AgreementItem s = fill_template(RcKind::kSubjectRc, f);
  EXPECT_EQ(s.sentence.tokens[3].form, default_vocab().transitive[0].plural);
}

TEST(Agreement, GeneratedItemsAreWellFormedAndNeverCopular) {
  std::set<std::string> copular;
  for (const auto& e : default_vocab().intransitive) {
    if (e.copular) copular.insert({e.singular, e.plural});
  }
  ASSERT_FALSE(copular.empty());
  for (RcKind kind : {RcKind::kObjectRc, RcKind::kSubjectRc}) {
    const auto items = generate_agreement(kind, 300, 11);
    std::set<std::string> distinct;
    for (const auto& it : items) {
      EXPECT_TRUE(is_well_formed_tree(it.sentence));
      EXPECT_EQ(it.sentence.tokens[it.subject].head, static_cast<int>(it.verb));
      EXPECT_FALSE(copular.count(it.sentence.tokens[it.verb].form));
      EXPECT_NE(it.sentence.tokens[1].form, it.sentence.tokens[kind == RcKind::kObjectRc ? 4 : 5].form);
      distinct.insert(text(it.sentence));
    }
    EXPECT_EQ(distinct.size(), items.size());
  }
}

TEST(Agreement, SeedDeterminism) {
  const auto a = generate_agreement(RcKind::kObjectRc, 40, 3);
  const auto b = generate_agreement(RcKind::kObjectRc, 40, 3);
  const auto c = generate_agreement(RcKind::kObjectRc, 40, 4);
  EXPECT_EQ(agreement_to_conllu(a), agreement_to_conllu(b));
  EXPECT_NE(agreement_to_conllu(a), agreement_to_conllu(c));
  EXPECT_EQ(a.front().sentence.id, "object_rc-0001");
}

TEST(Agreement, CountAndVocabularyErrors) {
  EXPECT_THROW(generate_agreement(RcKind::kObjectRc, 0, 1), ConfigError);
  AgreementVocab v = default_vocab();
  v.nouns.resize(1);
  EXPECT_THROW(generate_agreement(RcKind::kObjectRc, 1, 1, v), ConfigError);
  v = default_vocab();
  for (auto& e : v.intransitive) e.copular = true;
  EXPECT_THROW(generate_agreement(RcKind::kObjectRc, 1, 1, v), ConfigError);
  EXPECT_THROW(rc_kind_from_string("cleft"), ConfigError);
  EXPECT_EQ(rc_kind_from_string(to_string(RcKind::kSubjectRc)), RcKind::kSubjectRc);
}

TEST(Agreement, RecallCountsTreesWithTheEdge) {
  const auto items = generate_agreement(RcKind::kSubjectRc, 4, 2);
  std::vector<UndirectedTree> trees;
  for (const auto& it : items) trees.push_back(undirected_from_heads(it.sentence));
  EXPECT_EQ(agreement_recall(trees, items), 1.0);
  UndirectedTree chain{8, {}};
  for (std::size_t i = 0; i + 1 < 8; ++i) chain.edges.push_back(make_edge(i, i + 1));
  trees[0] = trees[1] = chain;
  EXPECT_FALSE(has_agreement_edge(chain, items[0]));
  EXPECT_EQ(agreement_recall(trees, items), 0.5);
  EXPECT_THROW(agreement_recall(std::span(trees).first(2), items), DataError);
}

TEST(Agreement, ConlluRoundTrip) {
  const auto items = generate_agreement(RcKind::kObjectRc, 5, 9);
  const auto back = agreement_from_conllu(agreement_to_conllu(items));
  ASSERT_EQ(back.size(), items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(back[i].subject, items[i].subject);
    EXPECT_EQ(back[i].verb, items[i].verb);
    EXPECT_EQ(back[i].sentence.id, items[i].sentence.id);
    EXPECT_EQ(text(back[i].sentence), text(items[i].sentence));
    EXPECT_EQ(back[i].sentence.tokens[2].deprel, items[i].sentence.tokens[2].deprel);
  }
}

TEST(Agreement, ReferenceBaselines) {
  EXPECT_EQ(kReferenceMiObjectRc, 8.9);
  EXPECT_EQ(kReferenceMiSubjectRc, 1.9);
}

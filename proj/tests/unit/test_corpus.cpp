#include <gtest/gtest.h>

#include <sstream>

#include "dsm/corpus.hpp"
#include "dsm/error.hpp"
#include "testutil.hpp"

using namespace dsm;

namespace {

std::string row(int id, const std::string& form, const std::string& upos, int head,
                const std::string& rel) {
  return std::to_string(id) + "\t" + form + "\t_\t" + upos + "\t_\t_\t" + std::to_string(head) +
         "\t" + rel + "\t_\t_\n";
}

Sentence make(std::size_t n, const std::string& upos = "NOUN") {
  Sentence s;
  for (std::size_t i = 0; i < n; ++i) {
    Token t;
    t.index = i;
    t.form = "w" + std::to_string(i);
    t.upos = upos;
    t.is_punct = upos == "PUNCT";
    s.tokens.push_back(t);
  }
  return s;
}

}  // namespace

TEST(Conllu, TwoTokenBlock) {
  const auto r = parse_conllu(row(1, "the", "DET", 2, "det") + row(2, "kids", "NOUN", 0, "root"));
  ASSERT_EQ(r.sentences.size(), 1u);
  const Sentence& s = r.sentences[0];
  EXPECT_TRUE(s.has_gold);
  EXPECT_TRUE(s.usable);
  EXPECT_EQ(s.tokens[0].head, 1);
  EXPECT_EQ(s.tokens[1].head, kRootHead);
  const GoldTree g = gold_tree(s);
  ASSERT_EQ(g.arcs.size(), 1u);
  EXPECT_EQ(g.arcs[0], (GoldArc{1, 0, "det"}));
  EXPECT_EQ(g.root, 1u);
  EXPECT_EQ(g.root_label, "root");
}

TEST(Conllu, GoldTreeHasNMinusOneArcs) {
  const auto r = read_conllu_file(testutil::data_path("fixture20.ud.conllu"));
  ASSERT_EQ(r.sentences.size(), 20u);
  EXPECT_TRUE(r.warnings.empty());
  for (const auto& s : r.sentences) {
    EXPECT_TRUE(s.usable) << s.id;
    const GoldTree g = gold_tree(s);
    EXPECT_EQ(g.arcs.size() + 1, s.size()) << s.id;
    EXPECT_TRUE(g.root.has_value());
    for (const auto& t : s.tokens) EXPECT_EQ(t.is_punct, t.upos == "PUNCT");
  }
  EXPECT_EQ(r.sentences[0].id, "fx-01");
  EXPECT_EQ(r.sentences[0].comments, std::vector<std::string>{"text = the cat sat on the mat ."});
}

TEST(Conllu, SkipsMultiwordRangesAndEmptyNodes) {
  const std::string text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n" + row(1, "do", "AUX", 3, "aux") +
                           row(2, "n't", "PART", 3, "advmod") + row(3, "go", "VERB", 0, "root") +
                           "3.1\tx\t_\tX\t_\t_\t_\t_\t_\t_\n";
  const auto r = parse_conllu(text);
  ASSERT_EQ(r.sentences.size(), 1u);
  EXPECT_EQ(r.sentences[0].words(), (std::vector<std::string>{"do", "n't", "go"}));
}

TEST(Conllu, MalformedLineReportsLineNumber) {
  const std::string text = "# sent_id = a\n" + row(1, "x", "NOUN", 0, "root") + "2\tbroken\n";
  try {
    parse_conllu(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
}

TEST(Conllu, NonIntegerHeadIsAnError) {
  std::string bad = "1\tx\t_\tNOUN\t_\t_\tzero\troot\t_\t_\n";
  EXPECT_THROW(parse_conllu(bad), ParseError);
}

TEST(Conllu, HeadOutsideSentenceIsAnError) {
  EXPECT_THROW(parse_conllu(row(1, "a", "NOUN", 0, "root") + row(2, "b", "NOUN", 5, "dep")),
               ParseError);
}

TEST(Conllu, CycleMarksSentenceUnusable) {
  const std::string text = "# sent_id = cyc\n" + row(1, "a", "NOUN", 2, "dep") +
                           row(2, "b", "NOUN", 1, "dep") + row(3, "c", "VERB", 0, "root") + "\n" +
                           "# sent_id = ok\n" + row(1, "x", "NOUN", 0, "root") + "\n";
  const auto r = parse_conllu(text);
  ASSERT_EQ(r.sentences.size(), 2u);
  EXPECT_FALSE(r.sentences[0].usable);
  EXPECT_TRUE(r.sentences[1].usable);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("cyc"), std::string::npos);
}

TEST(Conllu, TwoRootsAreNotWellFormed) {
  const auto r = parse_conllu(row(1, "a", "NOUN", 0, "root") + row(2, "b", "NOUN", 0, "root"));
  EXPECT_FALSE(r.sentences[0].usable);
}

TEST(Conllu, WriteThenParseRoundTrips) {
  const auto r = read_conllu_file(testutil::data_path("fixture20.ud.conllu"));
  const auto again = parse_conllu(to_conllu(r.sentences));
  EXPECT_EQ(again.sentences, r.sentences);
}

TEST(Conllu, MissingFileIsDataError) {
  EXPECT_THROW(read_conllu_file("/nonexistent/x.conllu"), DataError);
}

TEST(RawInput, WhitespaceTokenizedWithoutGold) {
  std::istringstream in("the  kids run\n\n  a b .\n");
  const Corpus c = read_raw_sentences(in);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].words(), (std::vector<std::string>{"the", "kids", "run"}));
  EXPECT_FALSE(c[0].has_gold);
  EXPECT_EQ(c[0].tokens[0].head, kNoHead);
  EXPECT_EQ(c[1].text(), "a b .");
}

TEST(Filter, UnboundedIsIdentity) {
  const Corpus c{make(3), make(30)};
  EXPECT_EQ(filter_corpus(c, {}), c);
}

TEST(Filter, DropsLongSentences) {
  const Corpus c{make(5), make(10), make(11)};
  const Corpus kept = filter_corpus(c, {10, true});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].size(), 5u);
  EXPECT_EQ(kept[1].size(), 10u);
  EXPECT_TRUE(filter_corpus({make(11)}, {10, true}).empty());
}

TEST(Filter, PunctuationCountingIsConfigurable) {
  Sentence s = make(10);
  Token p;
  p.index = 10;
  p.form = ".";
  p.upos = "PUNCT";
  p.is_punct = true;
  s.tokens.push_back(p);
  EXPECT_EQ(counted_length(s, true), 11u);
  EXPECT_EQ(counted_length(s, false), 10u);
  EXPECT_TRUE(filter_corpus({s}, {10, true}).empty());
  EXPECT_EQ(filter_corpus({s}, {10, false}).size(), 1u);
}

TEST(Filter, ZeroMaxLengthRejected) {
  EXPECT_THROW(filter_corpus({make(1)}, {0, true}), ConfigError);
}

TEST(Alignment, FixtureUdAndSudAgree) {
  const auto ud = read_conllu_file(testutil::data_path("fixture20.ud.conllu")).sentences;
  const auto sud = read_conllu_file(testutil::data_path("fixture20.sud.conllu")).sentences;
  EXPECT_NO_THROW(check_aligned(ud, sud));
  Corpus shorter(ud.begin(), ud.end() - 1);
  EXPECT_THROW(check_aligned(shorter, sud), DataError);
  Corpus changed = sud;
  changed[3].tokens[0].form = "zzz";
  EXPECT_THROW(check_aligned(ud, changed), DataError);
}

TEST(Scheme, Names) {
  EXPECT_EQ(scheme_from_string("UD"), Scheme::kUD);
  EXPECT_EQ(scheme_from_string("SUD"), Scheme::kSUD);
  EXPECT_EQ(to_string(Scheme::kSUD), "SUD");
  EXPECT_THROW(scheme_from_string("PTB"), ConfigError);
}

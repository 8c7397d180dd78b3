#include <gtest/gtest.h>

#include "dsm/error.hpp"
#include "dsm/fixture_provider.hpp"
#include "dsm/provider.hpp"

using namespace dsm;

namespace {
const std::vector<std::string> kWords{"the", "children", "played", "outside", "."};
}

TEST(FixtureAttention, SameSeedSameMatrices) {
  EXPECT_EQ(fixture_attention(kWords, {0, 3}, 4, 11), fixture_attention(kWords, {0, 3}, 4, 11));
}

TEST(FixtureAttention, DifferentSeedsDiffer) {
  const auto a = fixture_attention(kWords, {2}, 1, 1);
  const auto b = fixture_attention(kWords, {2}, 1, 2);
  EXPECT_NE(a.attention.at(2)[0].values(), b.attention.at(2)[0].values());
}

TEST(FixtureAttention, HeadsAndLayersDiffer) {
  const auto r = fixture_attention(kWords, {0, 1}, 2, 0);
  EXPECT_NE(r.attention.at(0)[0], r.attention.at(0)[1]);
  EXPECT_NE(r.attention.at(0)[0], r.attention.at(1)[0]);
}

TEST(FixtureAttention, RowsStochasticAndPositive) {
  const auto r = fixture_attention(kWords, {5}, 3, 9);
  for (const auto& m : r.attention.at(5)) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      double sum = 0.0;
      for (double v : m.row(i)) {
        EXPECT_GT(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(FixtureAttention, OneSubwordPerWordByDefault) {
  const auto r = fixture_attention(kWords, {0}, 1, 0);
  EXPECT_EQ(r.subword_forms, kWords);
  for (std::size_t i = 0; i < kWords.size(); ++i) EXPECT_EQ(r.word_ids[i], static_cast<int>(i));
}

TEST(FixtureAttention, SplitModeWrapsAndSplitsLongWords) {
  FixtureOptions o;
  o.heads = 1;
  o.split_subwords = true;
  const auto r = fixture_attention(kWords, {0}, o);
  const std::vector<std::string> forms{"[CLS]", "the", "chil", "##dren", "played",
                                       "outs", "##ide", ".", "[SEP]"};
  EXPECT_EQ(r.subword_forms, forms);
  const std::vector<std::optional<int>> ids{std::nullopt, 0, 1, 1, 2, 3, 3, 4, std::nullopt};
  EXPECT_EQ(r.word_ids, ids);
  EXPECT_EQ(r.attention.at(0)[0].size(), forms.size());
}

TEST(FixtureProvider, IdenticalRequestIdenticalEncodedResponse) {
  FixtureProvider p;
  ModelRequest req;
  req.id = 4;
  req.words = kWords;
  req.layers = {7};
  EXPECT_EQ(encode_response(p.request(req)), encode_response(p.request(req)));
  req.op = Op::kMlmTopk;
  req.position = 1;
  req.k = 10;
  EXPECT_EQ(encode_response(p.request(req)), encode_response(p.request(req)));
}

TEST(FixtureProvider, ResponsesSatisfyTheWireContract) {
  FixtureProvider p;
  ModelRequest req;
  req.id = 1;
  req.words = kWords;
  req.layers = {0, 11};
  EXPECT_NO_THROW(validate_response(req, p.request(req)));
  req.op = Op::kMlmTopk;
  req.position = 2;
  req.k = 8;
  const auto resp = p.request(req);
  EXPECT_NO_THROW(validate_response(req, resp));
  EXPECT_EQ(resp.candidates.size(), 8u);
  req.op = Op::kUpos;
  EXPECT_NO_THROW(validate_response(req, p.request(req)));
}

TEST(FixtureProvider, HandshakeReflectsOptions) {
  FixtureOptions o;
  o.model = "tiny";
  o.layers = 2;
  o.heads = 3;
  FixtureProvider p(o);
  EXPECT_EQ(p.hello(), (Handshake{"tiny", 2, 3}));
}

TEST(FixtureProvider, LayerOutsideDepthIsBackendError) {
  FixtureOptions o;
  o.layers = 4;
  FixtureProvider p(o);
  EXPECT_THROW(p.attention(kWords, {4}), BackendError);
}

TEST(FixtureProvider, FrozenCandidatesReturnedAsPrefix) {
  FixtureProvider p;
  const std::vector<std::string> w{"just", "thought", "you", "'d", "like", "to", "know", "."};
  p.freeze_candidates(w, 1, {{"figured", -1}, {"knew", -2}, {"think", -3}, {"said", -4}});
  const auto three = p.mlm_topk(w, 1, 3);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0].word, "figured");
  EXPECT_EQ(three[2].word, "think");
  EXPECT_EQ(p.mlm_topk(w, 1, 10).size(), 4u);
}

TEST(FixtureProvider, TopkPrefixProperty) {
  FixtureProvider p;
  const auto small = p.mlm_topk(kWords, 1, 5);
  const auto large = p.mlm_topk(kWords, 1, 20);
  ASSERT_EQ(small.size(), 5u);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i], large[i]);
}

TEST(FixtureUpos, ExampleSentence) {
  FixtureProvider p;
  const std::vector<std::string> w{"just", "thought", "you", "'d", "like", "to", "know", "."};
  const std::vector<std::string> tags{"ADV", "VERB", "PRON", "AUX", "VERB", "PART", "VERB", "PUNCT"};
  EXPECT_EQ(p.upos(w), tags);
  EXPECT_EQ(p.upos({"the", "kids", "run"}), (std::vector<std::string>{"DET", "NOUN", "VERB"}));
}

TEST(FixtureUpos, Heuristics) {
  EXPECT_EQ(fixture_upos("42", false), "NUM");
  EXPECT_EQ(fixture_upos("Paris", false), "PROPN");
  EXPECT_EQ(fixture_upos("Paris", true), "NOUN");
  EXPECT_EQ(fixture_upos("quickly", false), "ADV");
  EXPECT_EQ(fixture_upos("walking", false), "VERB");
  EXPECT_EQ(fixture_upos("famous", false), "ADJ");
  EXPECT_EQ(fixture_upos("...", false), "PUNCT");
}

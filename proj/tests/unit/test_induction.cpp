#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dsm/error.hpp"
#include "dsm/fixture_provider.hpp"
#include "dsm/induction.hpp"
#include "oracles.hpp"

using namespace dsm;

namespace {

std::vector<oracle::Pair> pairs(const UndirectedTree& t) {
  std::vector<oracle::Pair> out;
  for (const auto& e : t.edges) out.emplace_back(e.a, e.b);
  return out;
}

AttentionMatrix att(std::size_t n, std::vector<double> v) {
  return {SquareMatrix(n, std::move(v)), 0, kAveragedHead, true};
}

SubstitutionSet set_for(std::vector<std::string> target, std::size_t k, Provider& p) {
  Sentence s;
  s.id = "t1";
  for (std::size_t i = 0; i < target.size(); ++i) {
    Token t;
    t.index = i;
    t.form = target[i];
    s.tokens.push_back(t);
  }
  return generate_substitutions(s, k, p);
}

}  // namespace

TEST(Oracle, CayleyCounts) {
  EXPECT_EQ(oracle::all_spanning_trees(1).size(), 1u);
  EXPECT_EQ(oracle::all_spanning_trees(2).size(), 1u);
  EXPECT_EQ(oracle::all_spanning_trees(4).size(), 16u);
  EXPECT_EQ(oracle::all_spanning_trees(5).size(), 125u);
  // Rooted labeled trees on n nodes with a fixed root: n^(n-2).
  EXPECT_EQ(oracle::all_arborescences(4, 0).size(), 16u);
  EXPECT_EQ(oracle::all_arborescences(5, 3).size(), 125u);
}

TEST(PrimMst, MatchesBruteForceWeight) {
  std::mt19937_64 rng(101);
  for (std::size_t n = 1; n <= 7; ++n) {
    for (int trial = 0; trial < 60; ++trial) {
      const SquareMatrix m = oracle::random_symmetric(n, rng);
      const UndirectedTree t = prim_mst({m, true});
      ASSERT_TRUE(is_spanning_tree(t));
      EXPECT_EQ(tree_weight(t, m), oracle::brute_mst_weight(m)) << "n=" << n;
    }
  }
}

TEST(PrimMst, TieOrderMatchesGreedyReference) {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const SquareMatrix m = oracle::random_symmetric(n, rng, 2);
    EXPECT_EQ(pairs(prim_mst({m, true})), oracle::kruskal(m));
  }
}

TEST(PrimMst, SmallCases) {
  EXPECT_TRUE(prim_mst({SquareMatrix(0), true}).edges.empty());
  EXPECT_TRUE(prim_mst({SquareMatrix(1), true}).edges.empty());
  const UndirectedTree two = prim_mst({SquareMatrix(2, std::vector<double>{0, 0.1, 0.1, 0}), true});
  EXPECT_EQ(two.edges, (std::vector<Edge>{{0, 1}}));
}

TEST(PrimMst, ChainFavoringMatrix) {
  const std::size_t n = 6;
  SquareMatrix m(n, 0.01);
  for (std::size_t i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = 1.0;
  const UndirectedTree t = prim_mst({m, true});
  std::vector<Edge> chain;
  for (std::size_t i = 0; i + 1 < n; ++i) chain.push_back({i, i + 1});
  EXPECT_EQ(t.edges, chain);
  EXPECT_EQ(tree_weight(t, m), oracle::brute_mst_weight(m));
}

TEST(PrimMst, ConstantScoresGiveStarAtZero) {
  const UndirectedTree t = prim_mst({SquareMatrix(5, 0.3), true});
  EXPECT_EQ(t.edges, (std::vector<Edge>{{0, 1}, {0, 2}, {0, 3}, {0, 4}}));
}

TEST(PrimMst, InvariantUnderPositiveAffineMaps) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const SquareMatrix m = oracle::random_symmetric(n, rng, 16);
    SquareMatrix scaled = m;
    for (double& v : scaled.values()) v = 3.0 * v + 0.5;
    EXPECT_EQ(prim_mst({m, true}), prim_mst({scaled, true}));
  }
}

TEST(PrimMst, NonFiniteScoreRejected) {
  SquareMatrix m(3, 0.5);
  m(1, 2) = m(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(prim_mst({m, true}), DataError);
  m(1, 2) = m(2, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(prim_mst({m, true}), DataError);
}

TEST(ChuLiuEdmonds, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(201);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 60; ++trial) {
      const SquareMatrix s = oracle::random_square(n, rng);
      const std::size_t root = rng() % n;
      const DirectedTree t = chu_liu_edmonds(s, root);
      ASSERT_TRUE(is_arborescence(t));
      EXPECT_EQ(t.root, root);
      EXPECT_EQ(tree_weight(t, s), oracle::brute_arborescence_weight(s, root))
          << "n=" << n << " root=" << root;
    }
  }
}

TEST(ChuLiuEdmonds, TieHeavyMatrices) {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const SquareMatrix s = oracle::random_square(n, rng, 2);
    const std::size_t root = rng() % n;
    const DirectedTree t = chu_liu_edmonds(s, root);
    ASSERT_TRUE(is_arborescence(t));
    EXPECT_EQ(tree_weight(t, s), oracle::brute_arborescence_weight(s, root));
  }
}

TEST(ChuLiuEdmonds, TwoNodes) {
  const DirectedTree t = chu_liu_edmonds(SquareMatrix(2, std::vector<double>{0, 0.2, 0.9, 0}), 1);
  EXPECT_EQ(t.heads, (std::vector<int>{1, kRootHead}));
}

TEST(ChuLiuEdmonds, DominantCycleIsBroken) {
  SquareMatrix s(4, 0.1);
  s(1, 2) = s(2, 3) = s(3, 1) = 10.0;
  s(0, 2) = 0.5;
  const DirectedTree t = chu_liu_edmonds(s, 0);
  ASSERT_TRUE(is_arborescence(t));
  EXPECT_EQ(tree_weight(t, s), oracle::brute_arborescence_weight(s, 0));
  EXPECT_EQ(t.heads, (std::vector<int>{kRootHead, 3, 0, 2}));
}

TEST(ChuLiuEdmonds, TiesPreferSmallerHead) {
  const DirectedTree t = chu_liu_edmonds(SquareMatrix(4, 1.0), 0);
  EXPECT_EQ(t.heads, (std::vector<int>{kRootHead, 0, 0, 0}));
  const DirectedTree u = chu_liu_edmonds(SquareMatrix(4, 1.0), 2);
  EXPECT_TRUE(is_arborescence(u));
  EXPECT_EQ(tree_weight(u, SquareMatrix(4, 1.0)), 3.0);
}

TEST(ChuLiuEdmonds, RootOutOfRange) {
  EXPECT_THROW(chu_liu_edmonds(SquareMatrix(3, 1.0), 3), DataError);
}

TEST(TreeChecks, RejectMalformed) {
  EXPECT_FALSE(is_spanning_tree({3, {{0, 1}}}));
  EXPECT_FALSE(is_spanning_tree({3, {{0, 1}, {0, 1}}}));
  EXPECT_TRUE(is_spanning_tree({3, {{0, 2}, {1, 2}}}));
  EXPECT_FALSE(is_arborescence({3, 0, {kRootHead, 2, 1}, {}}));
  EXPECT_FALSE(is_arborescence({3, 0, {kRootHead, kRootHead, 0}, {}}));
  EXPECT_TRUE(is_arborescence({3, 0, {kRootHead, 0, 1}, {}}));
}

TEST(Aggregate, HandComputedMeanThenSymmetrize) {
  const AttentionMatrix a = att(3, {0, 0.6, 0.4, 0.5, 0, 0.5, 0.2, 0.8, 0});
  const AttentionMatrix b = att(3, {0, 0.2, 0.8, 0.1, 0, 0.9, 0.6, 0.4, 0});
  AggregationSpec spec;
  const ScoreMatrix s = aggregate(&a, std::span(&b, 1), spec);
  EXPECT_TRUE(s.symmetric);
  const double expected[3][3] = {{0, 0.35, 0.5}, {0.35, 0, 0.65}, {0.5, 0.65, 0}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.values(i, j), expected[i][j], 1e-15);
  }
}

TEST(Aggregate, TargetOnlyIsSymmetrizedTarget) {
  const AttentionMatrix a = att(3, {0.1, 0.6, 0.3, 0.5, 0.2, 0.3, 0.2, 0.7, 0.1});
  const ScoreMatrix s = aggregate(&a, {}, {});
  EXPECT_EQ(s.values, symmetrize(a).values);
}

TEST(Aggregate, IdenticalInputsGiveSameMatrix) {
  const AttentionMatrix a = att(3, {0.1, 0.6, 0.3, 0.5, 0.2, 0.3, 0.2, 0.7, 0.1});
  const std::vector<AttentionMatrix> vs(5, a);
  const ScoreMatrix s = aggregate(&a, vs, {});
  const SquareMatrix ref = symmetrize(a).values;
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(s.values.values()[i], ref.values()[i], 1e-15);
}

TEST(Aggregate, ExcludingTarget) {
  const AttentionMatrix a = att(2, {0, 1, 1, 0});
  const AttentionMatrix b = att(2, {0, 0.5, 0.5, 0});
  AggregationSpec spec;
  spec.include_target = false;
  EXPECT_DOUBLE_EQ(aggregate(&a, std::span(&b, 1), spec).values(0, 1), 0.5);
  EXPECT_THROW(aggregate(&a, {}, spec), DataError);
  EXPECT_THROW(aggregate(nullptr, {}, {}), DataError);
}

TEST(HeadModes, ParseAndCollapse) {
  EXPECT_EQ(HeadMode::parse("head:7").head, 7);
  EXPECT_EQ(HeadMode::parse("head:7").str(), "head:7");
  EXPECT_EQ(HeadMode::parse("layer_average").kind, HeadModeKind::kLayerAverage);
  EXPECT_THROW(HeadMode::parse("head:x"), ConfigError);
  EXPECT_THROW(HeadMode::parse("best"), ConfigError);

  const LayerHeads lh = reduce_to_words(fixture_attention({"a", "b", "c"}, {4}, 3, 0));
  EXPECT_EQ(collapse_heads(lh, 4, HeadMode::parse("head:2")), lh.at(4)[2]);
  EXPECT_EQ(collapse_heads(lh, 4, {}).values, layer_average(lh.at(4)).values);
  EXPECT_THROW(collapse_heads(lh, 4, HeadMode::parse("head:3")), DataError);
  EXPECT_THROW(collapse_heads(lh, 5, {}), DataError);
  EXPECT_THROW(collapse_heads(lh, 4, HeadMode::parse("head_inventory")), ConfigError);
}

TEST(MeanLayerHeads, PerHeadMean) {
  const LayerHeads x = reduce_to_words(fixture_attention({"a", "b"}, {1}, 2, 0));
  const LayerHeads y = reduce_to_words(fixture_attention({"c", "d"}, {1}, 2, 0));
  const std::vector<LayerHeads> in{x, y};
  const LayerHeads m = mean_layer_heads(in);
  for (int h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_DOUBLE_EQ(m.at(1)[h].values.values()[i],
                       (x.at(1)[h].values.values()[i] + y.at(1)[h].values.values()[i]) / 2.0);
    }
  }
  EXPECT_THROW(mean_layer_heads({}), DataError);
}

TEST(Induce, DeterministicAcrossRuns) {
  const std::vector<std::string> w{"the", "children", "played", "in", "the", "park", "."};
  AggregationSpec spec;
  spec.layer = 3;
  FixtureProvider p1, p2;
  ProviderAttentionSource s1(p1, {3}), s2(p2, {3});
  const auto a = induce(set_for(w, 3, p1), spec, s1);
  const auto b = induce(set_for(w, 3, p2), spec, s2);
  EXPECT_EQ(a.tree, b.tree);
  EXPECT_EQ(a.scores.values, b.scores.values);
  EXPECT_TRUE(is_spanning_tree(a.tree));
  EXPECT_EQ(a.tree.n, w.size());
}

TEST(Induce, EqualsManualComposition) {
  const std::vector<std::string> w{"dogs", "chase", "small", "cats", "."};
  FixtureProvider p;
  const SubstitutionSet set = set_for(w, 2, p);
  ASSERT_FALSE(set.variants.empty());
  AggregationSpec spec;
  spec.layer = 2;
  spec.head_mode = HeadMode::parse("head:5");
  ProviderAttentionSource src(p, {2});
  const Induction got = induce(set, spec, src);

  auto one = [&](const std::vector<std::string>& words) {
    return collapse_heads(reduce_to_words(fixture_attention(words, {2}, 12, 0)), 2,
                          spec.head_mode);
  };
  const AttentionMatrix target = one(w);
  std::vector<AttentionMatrix> variants;
  for (const auto& v : set.variants) variants.push_back(one(v.words));
  const ScoreMatrix manual = aggregate(&target, variants, spec);
  EXPECT_EQ(got.scores.values, manual.values);
  EXPECT_EQ(got.tree, prim_mst(manual));
  EXPECT_EQ(src.cached(), 1 + set.variants.size());
}

TEST(Induce, ErrorsNameTheSentence) {
  FixtureProvider p;
  const SubstitutionSet set = set_for({"a", "b"}, 0, p);
  const Archive empty;
  ArchiveAttentionSource src(empty);
  try {
    induce(set, {}, src);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sentence t1"), std::string::npos);
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

TEST(Orientation, PseudoRootAndBfs) {
  SquareMatrix m(4, std::vector<double>{0, 1, 1, 0,  //
                                        1, 0, 3, 0,  //
                                        1, 3, 0, 1,  //
                                        0, 0, 1, 0});
  EXPECT_EQ(pseudo_root({m, true}), 2u);
  EXPECT_EQ(pseudo_root({SquareMatrix(3, 1.0), true}), 0u);
  const UndirectedTree t{4, {{0, 2}, {1, 2}, {2, 3}}};
  EXPECT_EQ(orient(t, 2), (std::vector<int>{2, 2, kRootHead, 2}));
  EXPECT_EQ(orient({3, {{0, 1}, {1, 2}}}, 0), (std::vector<int>{kRootHead, 0, 1}));
}

TEST(Rendering, PredictedSentenceAndBrackets) {
  Sentence s;
  s.id = "x";
  s.comments = {"text = the cat sat"};
  for (std::string w : {"the", "cat", "sat"}) {
    Token t;
    t.index = s.tokens.size();
    t.form = w;
    s.tokens.push_back(t);
  }
  const Sentence p = predicted_sentence(s, {1, 2, kRootHead});
  EXPECT_TRUE(p.comments.empty());
  EXPECT_TRUE(p.usable);
  EXPECT_EQ(p.tokens[0].deprel, "dep");
  EXPECT_EQ(p.tokens[2].deprel, "root");
  EXPECT_EQ(undirected_from_heads(p).edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
  const DirectedTree d = directed_from_heads(p);
  EXPECT_EQ(d.root, 2u);
  EXPECT_EQ(d.heads, (std::vector<int>{1, 2, kRootHead}));
  EXPECT_EQ(render_brackets(p.words(), {1, 2, kRootHead}), "(sat (cat the))");
  EXPECT_EQ(render_brackets({"a", "b", "c"}, {kRootHead, 0, 0}), "(a b c)");
  const Sentence labeled = predicted_sentence(s, {1, 2, kRootHead}, {"det", "nsubj", "root"});
  EXPECT_EQ(labeled.tokens[1].deprel, "nsubj");
}

#pragma once

// Tree induction from attention: aggregate word-level matrices over a
// substitution set, then decode a maximum spanning tree (undirected) or a
// maximum arborescence (directed).

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsm/archive.hpp"
#include "dsm/attention.hpp"
#include "dsm/corpus.hpp"
#include "dsm/provider.hpp"
#include "dsm/substitution.hpp"

namespace dsm {

struct Edge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;

  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(std::size_t i, std::size_t j) {
  return i < j ? Edge{i, j} : Edge{j, i};
}

struct UndirectedTree {
  std::size_t n = 0;
  std::vector<Edge> edges;  // sorted

  bool operator==(const UndirectedTree&) const = default;
};

struct DirectedTree {
  std::size_t n = 0;
  std::size_t root = 0;
  std::vector<int> heads;            // kRootHead for the root
  std::vector<std::string> labels;   // empty when unlabeled

  bool operator==(const DirectedTree&) const = default;
};

// Symmetric, zero-diagonal pairwise scores.
struct ScoreMatrix {
  SquareMatrix values;
  bool symmetric = true;

  std::size_t n() const noexcept { return values.size(); }
};

enum class HeadModeKind { kLayerAverage, kSingleHead, kHeadInventory };

struct HeadMode {
  HeadModeKind kind = HeadModeKind::kLayerAverage;
  int head = 0;  // kSingleHead only

  static HeadMode parse(const std::string& s);  // "layer_average" | "head:<h>"
  std::string str() const;
};

struct AggregationSpec {
  bool include_target = true;
  int layer = 0;
  HeadMode head_mode;
  SymmetrizeMode symmetrize = SymmetrizeMode::kAvg;
};

// Mean over {target if include_target} ∪ variants, then symmetrized with a
// zeroed diagonal. Throws DataError on an empty input set or size mismatch.
ScoreMatrix aggregate(const AttentionMatrix* target,
                      std::span<const AttentionMatrix> variants,
                      const AggregationSpec& spec);

// Collapses the heads of spec.layer per spec.head_mode.
AttentionMatrix collapse_heads(const LayerHeads& attention, int layer,
                               const HeadMode& mode);

// Per-(layer, head) element-wise mean across several sentences' attention.
// All inputs must share shape.
LayerHeads mean_layer_heads(std::span<const LayerHeads> inputs);

// Maximum spanning tree by Prim's algorithm. Among equal weights the edge
// with the lexicographically smallest (min, max) pair wins. Throws DataError
// on a non-finite score.
UndirectedTree prim_mst(const ScoreMatrix& scores);

// Maximum-weight arborescence rooted at `root`; scores(h, d) scores the arc
// h -> d. Ties prefer the smaller head index.
DirectedTree chu_liu_edmonds(const SquareMatrix& scores, std::size_t root);

double tree_weight(const UndirectedTree& tree, const SquareMatrix& scores);
double tree_weight(const DirectedTree& tree, const SquareMatrix& scores);

bool is_spanning_tree(const UndirectedTree& tree);
bool is_arborescence(const DirectedTree& tree);

// Source of word-level attention for arbitrary word sequences.
class AttentionSource {
 public:
  virtual ~AttentionSource() = default;
  virtual LayerHeads fetch(const std::vector<std::string>& words) = 0;
};

// Queries a provider and reduces to words; results are memoized by sentence.
class ProviderAttentionSource : public AttentionSource {
 public:
  ProviderAttentionSource(Provider& provider, std::vector<int> layers,
                          FromWordMode mode = FromWordMode::kMean);
  LayerHeads fetch(const std::vector<std::string>& words) override;
  std::size_t cached() const;

 private:
  Provider& provider_;
  std::vector<int> layers_;
  FromWordMode mode_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const LayerHeads>> memo_;
};

class ArchiveAttentionSource : public AttentionSource {
 public:
  explicit ArchiveAttentionSource(const Archive& archive) : archive_(archive) {}
  // Throws DataError when the sentence was not extracted.
  LayerHeads fetch(const std::vector<std::string>& words) override;

 private:
  const Archive& archive_;
};

struct Induction {
  ScoreMatrix scores;
  UndirectedTree tree;
};

// fetch -> reduce -> collapse heads -> aggregate -> prim_mst. Errors carry
// the sentence id.
Induction induce(const SubstitutionSet& set, const AggregationSpec& spec,
                 AttentionSource& source);

// Word with the largest total score; ties go to the smaller index.
std::size_t pseudo_root(const ScoreMatrix& scores);

// Orients the tree away from `root` (BFS) and returns per-word heads.
std::vector<int> orient(const UndirectedTree& tree, std::size_t root);

// Writes the sentence with predicted heads; labels default to "dep".
Sentence predicted_sentence(const Sentence& words, const std::vector<int>& heads,
                            const std::vector<std::string>& labels = {});

// Bracketed rendering: "(head child child)" with leaves as bare words.
std::string render_brackets(const std::vector<std::string>& words,
                            const std::vector<int>& heads);

// Undirected edges of a sentence's head column (predicted files).
UndirectedTree undirected_from_heads(const Sentence& sentence);
DirectedTree directed_from_heads(const Sentence& sentence);

}  // namespace dsm

#include "dsm/induction.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>

#include "dsm/error.hpp"

namespace dsm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Dense Chu-Liu/Edmonds on a score matrix that already has -inf on the
// diagonal and in the root column.
std::vector<int> cle_heads(const SquareMatrix& s, std::size_t root) {
  const std::size_t n = s.size();
  std::vector<int> heads(n, kRootHead);
  for (std::size_t d = 0; d < n; ++d) {
    if (d == root) continue;
    std::size_t best = root;
    double best_score = kNegInf;
    bool found = false;
    for (std::size_t h = 0; h < n; ++h) {
      if (h == d) continue;
      if (!found || s(h, d) > best_score) {
        best = h;
        best_score = s(h, d);
        found = true;
      }
    }
    heads[d] = static_cast<int>(best);
  }

  // Find one cycle among the greedy choices.
  std::vector<int> color(n, 0);  // 0 new, 1 on current path, 2 done
  std::vector<std::size_t> cycle;
  for (std::size_t start = 0; start < n && cycle.empty(); ++start) {
    if (color[start] != 0) continue;
    std::vector<std::size_t> path;
    std::size_t cur = start;
    while (true) {
      if (color[cur] == 1) {
        auto it = std::find(path.begin(), path.end(), cur);
        cycle.assign(it, path.end());
        break;
      }
      if (color[cur] == 2) break;
      color[cur] = 1;
      path.push_back(cur);
      if (heads[cur] == kRootHead) break;
      cur = static_cast<std::size_t>(heads[cur]);
    }
    for (std::size_t v : path) color[v] = 2;
  }
  if (cycle.empty()) return heads;

  std::sort(cycle.begin(), cycle.end());
  std::vector<bool> in_cycle(n, false);
  for (std::size_t v : cycle) in_cycle[v] = true;

  // Contract: outside nodes keep their order, the cycle becomes the last node.
  std::vector<std::size_t> to_new(n), to_old;
  for (std::size_t v = 0; v < n; ++v) {
    if (!in_cycle[v]) {
      to_new[v] = to_old.size();
      to_old.push_back(v);
    }
  }
  const std::size_t c = to_old.size();
  for (std::size_t v : cycle) to_new[v] = c;
  const std::size_t m = c + 1;

  SquareMatrix s2(m, kNegInf);
  std::vector<std::size_t> enter(n, 0);  // outside u -> cycle node it enters
  std::vector<std::size_t> leave(n, 0);  // outside v -> cycle node it leaves from
  for (std::size_t u : to_old) {
    for (std::size_t v : to_old) {
      if (u != v) s2(to_new[u], to_new[v]) = s(u, v);
    }
    double best_in = kNegInf;
    bool have_in = false;
    for (std::size_t v : cycle) {
      const double gain = s(u, v) - s(static_cast<std::size_t>(heads[v]), v);
      if (!have_in || gain > best_in) {
        best_in = gain;
        enter[u] = v;
        have_in = true;
      }
    }
    s2(to_new[u], c) = best_in;
    double best_out = kNegInf;
    bool have_out = false;
    for (std::size_t w : cycle) {
      if (!have_out || s(w, u) > best_out) {
        best_out = s(w, u);
        leave[u] = w;
        have_out = true;
      }
    }
    s2(c, to_new[u]) = best_out;
  }
  const std::size_t new_root = to_new[root];
  for (std::size_t v = 0; v < m; ++v) s2(v, new_root) = kNegInf;

  const std::vector<int> heads2 = cle_heads(s2, new_root);

  std::vector<int> out = heads;  // cycle-internal arcs survive except one
  for (std::size_t v : to_old) {
    const int h2 = heads2[to_new[v]];
    if (h2 == kRootHead) {
      out[v] = kRootHead;
    } else if (static_cast<std::size_t>(h2) == c) {
      out[v] = static_cast<int>(leave[v]);
    } else {
      out[v] = static_cast<int>(to_old[static_cast<std::size_t>(h2)]);
    }
  }
  const auto u = to_old[static_cast<std::size_t>(heads2[c])];
  out[enter[u]] = static_cast<int>(u);
  return out;
}

}  // namespace

HeadMode HeadMode::parse(const std::string& s) {
  if (s == "layer_average") return {HeadModeKind::kLayerAverage, 0};
  if (s == "head_inventory") return {HeadModeKind::kHeadInventory, 0};
  if (s.rfind("head:", 0) == 0) {
    try {
      return {HeadModeKind::kSingleHead, std::stoi(s.substr(5))};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown head mode '" + s + "'");
}

std::string HeadMode::str() const {
  switch (kind) {
    case HeadModeKind::kLayerAverage:
      return "layer_average";
    case HeadModeKind::kSingleHead:
      return "head:" + std::to_string(head);
    case HeadModeKind::kHeadInventory:
      return "head_inventory";
  }
  return "?";
}

ScoreMatrix aggregate(const AttentionMatrix* target,
                      std::span<const AttentionMatrix> variants,
                      const AggregationSpec& spec) {
  std::vector<SquareMatrix> pool;
  pool.reserve(variants.size() + 1);
  if (target && spec.include_target) pool.push_back(target->values);
  for (const auto& v : variants) pool.push_back(v.values);
  if (pool.empty()) throw DataError("aggregate: no target and no variants");
  AttentionMatrix mean{mean_matrix(pool), spec.layer, kAveragedHead, false};
  return {symmetrize(mean, spec.symmetrize).values, true};
}

AttentionMatrix collapse_heads(const LayerHeads& attention, int layer,
                               const HeadMode& mode) {
  auto it = attention.find(layer);
  if (it == attention.end() || it->second.empty()) {
    throw DataError("no attention for layer " + std::to_string(layer));
  }
  switch (mode.kind) {
    case HeadModeKind::kLayerAverage:
      return layer_average(it->second);
    case HeadModeKind::kSingleHead:
      if (mode.head < 0 || static_cast<std::size_t>(mode.head) >= it->second.size()) {
        throw DataError("head " + std::to_string(mode.head) + " out of range");
      }
      return it->second[static_cast<std::size_t>(mode.head)];
    case HeadModeKind::kHeadInventory:
      break;
  }
  throw ConfigError("head_inventory mode requires directed induction (headsel)");
}

LayerHeads mean_layer_heads(std::span<const LayerHeads> inputs) {
  if (inputs.empty()) throw DataError("mean over zero attention sets");
  LayerHeads out;
  for (const auto& [layer, heads] : inputs.front()) {
    auto& dst = out[layer];
    for (std::size_t h = 0; h < heads.size(); ++h) {
      std::vector<SquareMatrix> mats;
      mats.reserve(inputs.size());
      for (const auto& in : inputs) {
        auto it = in.find(layer);
        if (it == in.end() || it->second.size() != heads.size()) {
          throw DataError("attention sets differ in layers or heads");
        }
        mats.push_back(it->second[h].values);
      }
      dst.push_back({mean_matrix(mats), layer, static_cast<int>(h), true});
    }
  }
  return out;
}

UndirectedTree prim_mst(const ScoreMatrix& scores) {
  const std::size_t n = scores.n();
  for (double v : scores.values.values()) {
    if (!std::isfinite(v)) throw DataError("prim_mst: non-finite score");
  }
  UndirectedTree tree;
  tree.n = n;
  if (n <= 1) return tree;

  // (weight desc, pair asc) is a strict total order on edges, so the maximum
  // spanning tree under it is unique and Prim finds it.
  auto better = [&](const Edge& x, const Edge& y) {
    const double wx = scores.values(x.a, x.b);
    const double wy = scores.values(y.a, y.b);
    if (wx != wy) return wx > wy;
    return x < y;
  };
  std::vector<bool> in_tree(n, false);
  std::vector<Edge> best(n);
  in_tree[0] = true;
  for (std::size_t v = 1; v < n; ++v) best[v] = make_edge(0, v);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t pick = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      if (pick == n || better(best[v], best[pick])) pick = v;
    }
    in_tree[pick] = true;
    tree.edges.push_back(best[pick]);
    for (std::size_t u = 0; u < n; ++u) {
      if (in_tree[u]) continue;
      const Edge cand = make_edge(pick, u);
      if (better(cand, best[u])) best[u] = cand;
    }
  }
  std::sort(tree.edges.begin(), tree.edges.end());
  return tree;
}

DirectedTree chu_liu_edmonds(const SquareMatrix& scores, std::size_t root) {
  const std::size_t n = scores.size();
  if (root >= n) throw DataError("chu_liu_edmonds: root out of range");
  SquareMatrix s = scores;
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = kNegInf;
    s(i, root) = kNegInf;
  }
  DirectedTree tree;
  tree.n = n;
  tree.root = root;
  tree.heads = cle_heads(s, root);
  return tree;
}

double tree_weight(const UndirectedTree& tree, const SquareMatrix& scores) {
  double w = 0.0;
  for (const auto& e : tree.edges) w += scores(e.a, e.b);
  return w;
}

double tree_weight(const DirectedTree& tree, const SquareMatrix& scores) {
  double w = 0.0;
  for (std::size_t d = 0; d < tree.n; ++d) {
    if (tree.heads[d] != kRootHead) w += scores(static_cast<std::size_t>(tree.heads[d]), d);
  }
  return w;
}

bool is_spanning_tree(const UndirectedTree& tree) {
  const std::size_t n = tree.n;
  if (n == 0) return tree.edges.empty();
  if (tree.edges.size() != n - 1) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (const auto& e : tree.edges) {
    if (e.a >= n || e.b >= n || e.a == e.b) return false;
    const auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) return false;  // cycle
    parent[ra] = rb;
  }
  return true;  // n-1 edges, acyclic => connected
}

bool is_arborescence(const DirectedTree& tree) {
  const std::size_t n = tree.n;
  if (tree.heads.size() != n || tree.root >= n) return false;
  for (std::size_t d = 0; d < n; ++d) {
    if ((tree.heads[d] == kRootHead) != (d == tree.root)) return false;
    if (tree.heads[d] != kRootHead &&
        (tree.heads[d] < 0 || static_cast<std::size_t>(tree.heads[d]) >= n)) {
      return false;
    }
  }
  for (std::size_t d = 0; d < n; ++d) {
    std::size_t cur = d, steps = 0;
    while (tree.heads[cur] != kRootHead) {
      cur = static_cast<std::size_t>(tree.heads[cur]);
      if (++steps > n) return false;
    }
  }
  return true;
}

ProviderAttentionSource::ProviderAttentionSource(Provider& provider,
                                                 std::vector<int> layers,
                                                 FromWordMode mode)
    : provider_(provider), layers_(std::move(layers)), mode_(mode) {}

LayerHeads ProviderAttentionSource::fetch(const std::vector<std::string>& words) {
  const std::string key = sentence_key(words);
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return *it->second;
  }
  auto reduced = std::make_shared<const LayerHeads>(
      reduce_to_words(provider_.attention(words, layers_), mode_));
  for (int layer : layers_) {
    if (!reduced->count(layer)) {
      throw ProtocolError("provider omitted layer " + std::to_string(layer));
    }
  }
  if (!reduced->empty() && reduced->begin()->second.front().n() != words.size()) {
    throw DataError("attention covers " +
                    std::to_string(reduced->begin()->second.front().n()) +
                    " words, sentence has " + std::to_string(words.size()));
  }
  std::lock_guard lock(mu_);
  memo_.emplace(key, reduced);
  return *reduced;
}

std::size_t ProviderAttentionSource::cached() const {
  std::lock_guard lock(mu_);
  return memo_.size();
}

LayerHeads ArchiveAttentionSource::fetch(const std::vector<std::string>& words) {
  const ArchiveRecord* r = archive_.find(words);
  if (!r) throw DataError("sentence not in attention archive: " + sentence_key(words));
  return record_attention(*r, archive_.header());
}

Induction induce(const SubstitutionSet& set, const AggregationSpec& spec,
                 AttentionSource& source) {
  try {
    const AttentionMatrix target =
        collapse_heads(source.fetch(set.target), spec.layer, spec.head_mode);
    std::vector<AttentionMatrix> variants;
    variants.reserve(set.variants.size());
    for (const auto& v : set.variants) {
      variants.push_back(collapse_heads(source.fetch(v.words), spec.layer, spec.head_mode));
      if (variants.back().n() != target.n()) {
        throw DataError("variant length differs from target");
      }
    }
    Induction out{aggregate(&target, variants, spec), {}};
    out.tree = prim_mst(out.scores);
    return out;
  } catch (const Error& e) {
    throw SentenceError(set.id, e);
  } catch (const std::exception& e) {
    throw SentenceError(set.id, e);
  }
}

std::size_t pseudo_root(const ScoreMatrix& scores) {
  std::size_t best = 0;
  double best_total = kNegInf;
  for (std::size_t i = 0; i < scores.n(); ++i) {
    double total = 0.0;
    for (double v : scores.values.row(i)) total += v;
    if (total > best_total) {
      best_total = total;
      best = i;
    }
  }
  return best;
}

std::vector<int> orient(const UndirectedTree& tree, std::size_t root) {
  std::vector<std::vector<std::size_t>> adj(tree.n);
  for (const auto& e : tree.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  std::vector<int> heads(tree.n, kNoHead);
  if (tree.n == 0) return heads;
  heads[root] = kRootHead;
  std::deque<std::size_t> queue{root};
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t u : adj[v]) {
      if (heads[u] != kNoHead) continue;
      heads[u] = static_cast<int>(v);
      queue.push_back(u);
    }
  }
  return heads;
}

Sentence predicted_sentence(const Sentence& words, const std::vector<int>& heads,
                            const std::vector<std::string>& labels) {
  Sentence out = words;
  out.comments.clear();
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    auto& t = out.tokens[i];
    t.head = heads.at(i);
    if (!labels.empty()) {
      t.deprel = labels.at(i);
    } else {
      t.deprel = t.head == kRootHead ? "root" : "dep";
    }
  }
  out.has_gold = true;
  out.usable = is_well_formed_tree(out);
  return out;
}

std::string render_brackets(const std::vector<std::string>& words,
                            const std::vector<int>& heads) {
  const std::size_t n = words.size();
  std::vector<std::vector<std::size_t>> children(n);
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    if (heads[i] == kRootHead) {
      roots.push_back(i);
    } else if (heads[i] >= 0) {
      children[static_cast<std::size_t>(heads[i])].push_back(i);
    }
  }
  std::function<std::string(std::size_t)> render = [&](std::size_t v) {
    if (children[v].empty()) return words[v];
    std::string s = "(" + words[v];
    for (std::size_t c : children[v]) s += " " + render(c);
    return s + ")";
  };
  std::string out;
  for (std::size_t r : roots) {
    if (!out.empty()) out += ' ';
    out += render(r);
  }
  return out;
}

UndirectedTree undirected_from_heads(const Sentence& sentence) {
  UndirectedTree tree;
  tree.n = sentence.size();
  for (const auto& t : sentence.tokens) {
    if (t.head >= 0) tree.edges.push_back(make_edge(static_cast<std::size_t>(t.head), t.index));
  }
  std::sort(tree.edges.begin(), tree.edges.end());
  return tree;
}

DirectedTree directed_from_heads(const Sentence& sentence) {
  DirectedTree tree;
  tree.n = sentence.size();
  for (const auto& t : sentence.tokens) {
    tree.heads.push_back(t.head);
    tree.labels.push_back(t.deprel);
    if (t.head == kRootHead) tree.root = t.index;
  }
  return tree;
}

}  // namespace dsm

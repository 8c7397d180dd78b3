#include "dsm/headsel.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "dsm/error.hpp"
#include "json.hpp"

namespace dsm {

using nlohmann::json;

namespace {

struct Tally {
  std::size_t hit = 0;
  std::size_t total = 0;
};

const std::vector<AttentionMatrix>& heads_of(const LayerHeads& a, int layer) {
  auto it = a.find(layer);
  if (it == a.end()) throw DataError("no attention for layer " + std::to_string(layer));
  return it->second;
}

bool scored(const Sentence& s) { return s.has_gold && s.usable; }

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::kDepToParent ? "dep_to_parent" : "parent_to_dep";
}

Direction direction_from_string(std::string_view s) {
  if (s == "dep_to_parent") return Direction::kDepToParent;
  if (s == "parent_to_dep") return Direction::kParentToDep;
  throw ConfigError("unknown direction '" + std::string(s) + "'");
}

const HeadEntry* HeadInventory::find(std::string_view label, Direction d) const {
  for (const auto& e : entries) {
    if (e.label == label && e.direction == d) return &e;
  }
  return nullptr;
}

std::string base_label(std::string_view deprel) {
  return std::string(deprel.substr(0, deprel.find(':')));
}

std::size_t row_argmax(const SquareMatrix& m, std::size_t i) {
  if (m.size() < 2) return i;
  std::size_t best = i == 0 ? 1 : 0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (j != i && m(i, j) > m(i, best)) best = j;
  }
  return best;
}

std::optional<double> head_accuracy(const Corpus& corpus,
                                    std::span<const LayerHeads> attention,
                                    int layer, int head, const std::string& label,
                                    Direction direction,
                                    const HeadselOptions& options) {
  if (attention.size() != corpus.size()) {
    throw DataError("attention count differs from corpus size");
  }
  Tally t;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (!scored(corpus[s])) continue;
    const auto& heads = heads_of(attention[s], layer);
    if (head < 0 || static_cast<std::size_t>(head) >= heads.size()) {
      throw DataError("head " + std::to_string(head) + " out of range");
    }
    const SquareMatrix& m = heads[static_cast<std::size_t>(head)].values;
    for (const auto& arc : gold_tree(corpus[s]).arcs) {
      const std::string l = options.base_labels ? base_label(arc.label) : arc.label;
      if (l != label) continue;
      ++t.total;
      if (direction == Direction::kDepToParent) {
        t.hit += row_argmax(m, arc.dep) == arc.head;
      } else {
        t.hit += row_argmax(m, arc.head) == arc.dep;
      }
    }
  }
  if (t.total == 0) return std::nullopt;
  return static_cast<double>(t.hit) / static_cast<double>(t.total);
}

HeadInventory select_heads(const Corpus& selection,
                           std::span<const LayerHeads> attention,
                           const std::vector<std::string>& labels,
                           const HeadselOptions& options) {
  if (attention.size() != selection.size()) {
    throw DataError("attention count differs from corpus size");
  }
  HeadInventory inv;
  inv.selection_size = selection.size();
  if (selection.empty()) return inv;

  // Search space from the first sentence; all must agree.
  std::vector<std::pair<int, int>> space;
  for (const auto& [layer, heads] : attention.front()) {
    for (std::size_t h = 0; h < heads.size(); ++h) space.emplace_back(layer, static_cast<int>(h));
  }
  const std::set<std::string> wanted(labels.begin(), labels.end());

  std::map<std::pair<std::string, Direction>, std::vector<Tally>> tallies;
  for (std::size_t s = 0; s < selection.size(); ++s) {
    if (!scored(selection[s])) continue;
    const auto arcs = gold_tree(selection[s]).arcs;
    if (arcs.empty()) continue;
    const std::size_t n = selection[s].size();
    for (std::size_t c = 0; c < space.size(); ++c) {
      const auto& heads = heads_of(attention[s], space[c].first);
      if (static_cast<std::size_t>(space[c].second) >= heads.size()) {
        throw DataError("sentences disagree on head count");
      }
      const SquareMatrix& m = heads[static_cast<std::size_t>(space[c].second)].values;
      if (m.size() != n) throw DataError("attention size differs from sentence length");
      std::vector<std::size_t> arg(n);
      for (std::size_t i = 0; i < n; ++i) arg[i] = row_argmax(m, i);
      for (const auto& arc : arcs) {
        std::string l = options.base_labels ? base_label(arc.label) : arc.label;
        if (!wanted.empty() && !wanted.count(l)) continue;
        for (Direction d : {Direction::kDepToParent, Direction::kParentToDep}) {
          auto& v = tallies[{l, d}];
          v.resize(space.size());
          ++v[c].total;
          v[c].hit += d == Direction::kDepToParent ? arg[arc.dep] == arc.head
                                                   : arg[arc.head] == arc.dep;
        }
      }
    }
  }

  for (const auto& [key, v] : tallies) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c) {
      // Every candidate saw the same arcs.
      if (v[c].hit > v[best].hit) best = c;
    }
    inv.entries.push_back({key.first, key.second, space[best].first, space[best].second,
                           static_cast<double>(v[best].hit) /
                               static_cast<double>(v[best].total)});
  }
  return inv;
}

DirectedTree induce_directed(const LayerHeads& attention,
                             const HeadInventory& inventory,
                             std::optional<std::size_t> root) {
  if (inventory.entries.empty()) throw DataError("empty head inventory");
  const std::size_t n = heads_of(attention, inventory.entries.front().layer).front().n();
  DirectedTree tree;
  tree.n = n;
  if (n == 0) return tree;

  SquareMatrix combined(n, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> winner(n * n, 0);
  for (std::size_t e = 0; e < inventory.entries.size(); ++e) {
    const auto& entry = inventory.entries[e];
    const auto& heads = heads_of(attention, entry.layer);
    if (entry.head < 0 || static_cast<std::size_t>(entry.head) >= heads.size()) {
      throw DataError("inventory head out of range");
    }
    const SquareMatrix& m = heads[static_cast<std::size_t>(entry.head)].values;
    if (m.size() != n) throw DataError("attention size mismatch");
    for (std::size_t h = 0; h < n; ++h) {
      for (std::size_t d = 0; d < n; ++d) {
        if (h == d) continue;
        const double v = entry.direction == Direction::kDepToParent ? m(d, h) : m(h, d);
        if (v > combined(h, d)) {
          combined(h, d) = v;
          winner[h * n + d] = e;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) combined(i, i) = 0.0;

  std::size_t r = 0;
  if (root) {
    if (*root >= n) throw DataError("root out of range");
    r = *root;
  } else {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < n; ++h) {
      double total = 0.0;
      for (std::size_t d = 0; d < n; ++d) total += combined(h, d);
      if (total > best) {
        best = total;
        r = h;
      }
    }
  }
  tree = chu_liu_edmonds(combined, r);
  tree.labels.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    tree.labels[d] = tree.heads[d] == kRootHead
                         ? "root"
                         : inventory.entries[winner[static_cast<std::size_t>(tree.heads[d]) * n + d]].label;
  }
  return tree;
}

LayerHeads substitution_attention(const SubstitutionSet& set,
                                  AttentionSource& source, bool include_target) {
  std::vector<LayerHeads> pool;
  if (include_target) pool.push_back(source.fetch(set.target));
  for (const auto& v : set.variants) pool.push_back(source.fetch(v.words));
  return mean_layer_heads(pool);
}

std::string inventory_to_json(const HeadInventory& inventory) {
  json entries = json::array();
  for (const auto& e : inventory.entries) {
    entries.push_back({{"label", e.label},
                       {"direction", std::string(to_string(e.direction))},
                       {"layer", e.layer},
                       {"head", e.head},
                       {"accuracy", e.accuracy}});
  }
  return json{{"selection_size", inventory.selection_size}, {"entries", std::move(entries)}}
      .dump(2);
}

HeadInventory inventory_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    HeadInventory inv;
    inv.selection_size = j.at("selection_size").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      inv.entries.push_back({e.at("label").get<std::string>(),
                             direction_from_string(e.at("direction").get<std::string>()),
                             e.at("layer").get<int>(), e.at("head").get<int>(),
                             e.at("accuracy").get<double>()});
    }
    return inv;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed head inventory: ") + e.what());
  }
}

}  // namespace dsm

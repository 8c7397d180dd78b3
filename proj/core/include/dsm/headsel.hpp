#pragma once

// Supervised head selection: pick, per relation label and direction, the
// attention head whose argmax most often lands on the gold partner, then
// decode directed labeled trees from the selected heads.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsm/attention.hpp"
#include "dsm/corpus.hpp"
#include "dsm/induction.hpp"

namespace dsm {

enum class Direction { kDepToParent, kParentToDep };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct HeadEntry {
  std::string label;
  Direction direction = Direction::kDepToParent;
  int layer = 0;
  int head = 0;
  double accuracy = 0.0;

  bool operator==(const HeadEntry&) const = default;
};

struct HeadInventory {
  std::vector<HeadEntry> entries;  // sorted by (label, direction)
  std::size_t selection_size = 0;

  const HeadEntry* find(std::string_view label, Direction d) const;
  bool operator==(const HeadInventory&) const = default;
};

// "nsubj:pass" -> "nsubj"
std::string base_label(std::string_view deprel);

struct HeadselOptions {
  // Compare labels without their subtype.
  bool base_labels = true;
};

// Index of the largest entry of row `i` excluding column `i`; ties go to the
// smaller index.
std::size_t row_argmax(const SquareMatrix& m, std::size_t i);

// Fraction of gold arcs labeled `label` for which the head's argmax points at
// the partner word. nullopt when the label does not occur. `attention[s]` is
// the word-level attention of `corpus[s]`.
std::optional<double> head_accuracy(const Corpus& corpus,
                                    std::span<const LayerHeads> attention,
                                    int layer, int head, const std::string& label,
                                    Direction direction,
                                    const HeadselOptions& options = {});

// Searches every (layer, head) present in `attention`. Empty `labels` means
// all labels in the corpus. Ties keep the smallest (layer, head).
HeadInventory select_heads(const Corpus& selection,
                           std::span<const LayerHeads> attention,
                           const std::vector<std::string>& labels = {},
                           const HeadselOptions& options = {});

// Combined score(h, d) is the max over inventory entries; the entry that
// wins labels the arc. Without `root`, the word with the largest total
// outgoing score is the root. Throws DataError on an empty inventory.
DirectedTree induce_directed(const LayerHeads& attention,
                             const HeadInventory& inventory,
                             std::optional<std::size_t> root = std::nullopt);

// Mean attention over a substitution set, per (layer, head).
LayerHeads substitution_attention(const SubstitutionSet& set,
                                  AttentionSource& source,
                                  bool include_target = true);

std::string inventory_to_json(const HeadInventory& inventory);
HeadInventory inventory_from_json(std::string_view text);

}  // namespace dsm

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "dsm/matrix.hpp"
#include "dsm/provider.hpp"

namespace dsm {

inline constexpr int kAveragedHead = -1;

// Word-level attention for one (layer, head). Row i is the distribution of
// word i over all words of the sentence.
struct AttentionMatrix {
  SquareMatrix values;
  int layer = 0;
  int head = kAveragedHead;
  bool row_stochastic = true;

  std::size_t n() const noexcept { return values.size(); }
  bool operator==(const AttentionMatrix&) const = default;
};

// layer -> one matrix per head
using LayerHeads = std::map<int, std::vector<AttentionMatrix>>;

// How a multi-subword word's outgoing rows are combined.
enum class FromWordMode { kMean, kSum };

enum class SymmetrizeMode { kAvg, kMax };

std::string_view to_string(SymmetrizeMode mode);
SymmetrizeMode symmetrize_mode_from_string(std::string_view s);
FromWordMode from_word_mode_from_string(std::string_view s);

// Subword -> word conversion. Incoming mass of a word is the sum of its
// subword columns; outgoing mass is the mean (or sum) of its subword rows.
// Special tokens (word id nullopt) are dropped, then each row is renormalized
// to 1. A row left with no mass becomes uniform. Throws DataError when a word
// index has no subword.
LayerHeads reduce_to_words(const ModelResponse& resp,
                           FromWordMode mode = FromWordMode::kMean);

// Element-wise mean over heads of one layer. Throws DataError on size or
// layer mismatch.
AttentionMatrix layer_average(std::span<const AttentionMatrix> heads);

// avg: (M + Mᵀ)/2, max: max(M, Mᵀ). Diagonal zeroed; result is not
// row-stochastic.
AttentionMatrix symmetrize(const AttentionMatrix& m,
                           SymmetrizeMode mode = SymmetrizeMode::kAvg);

// Element-wise mean of same-size matrices (no symmetrization).
SquareMatrix mean_matrix(std::span<const SquareMatrix> mats);

// Largest |row sum - 1| over all rows.
double max_row_deviation(const SquareMatrix& m);

}  // namespace dsm

#include "dsm/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsm/error.hpp"

namespace dsm {

std::string_view to_string(SymmetrizeMode mode) {
  return mode == SymmetrizeMode::kAvg ? "avg" : "max";
}

SymmetrizeMode symmetrize_mode_from_string(std::string_view s) {
  if (s == "avg") return SymmetrizeMode::kAvg;
  if (s == "max") return SymmetrizeMode::kMax;
  throw ConfigError("unknown symmetrization mode '" + std::string(s) + "'");
}

FromWordMode from_word_mode_from_string(std::string_view s) {
  if (s == "mean") return FromWordMode::kMean;
  if (s == "sum") return FromWordMode::kSum;
  throw ConfigError("unknown from_word_mode '" + std::string(s) + "'");
}

LayerHeads reduce_to_words(const ModelResponse& resp, FromWordMode mode) {
  const std::size_t t = resp.word_ids.size();
  if (resp.subword_forms.size() != t) {
    throw DataError("subword_forms and word_ids differ in length");
  }
  std::size_t n = 0;
  for (const auto& w : resp.word_ids) {
    if (w) {
      if (*w < 0) throw DataError("negative word id");
      n = std::max(n, static_cast<std::size_t>(*w) + 1);
    }
  }
  std::vector<std::size_t> pieces(n, 0);
  for (const auto& w : resp.word_ids) {
    if (w) ++pieces[static_cast<std::size_t>(*w)];
  }
  for (std::size_t w = 0; w < n; ++w) {
    if (pieces[w] == 0) {
      throw DataError("alignment: word " + std::to_string(w) +
                      " has no subwords");
    }
  }

  LayerHeads out;
  for (const auto& [layer, heads] : resp.attention) {
    auto& words = out[layer];
    for (std::size_t h = 0; h < heads.size(); ++h) {
      const SquareMatrix& sub = heads[h];
      if (sub.size() != t) throw DataError("attention matrix is not T×T");
      // Columns first: sum subword columns into word columns, per subword row.
      SquareMatrix result(n);
      for (std::size_t r = 0; r < t; ++r) {
        if (!resp.word_ids[r]) continue;
        const auto wr = static_cast<std::size_t>(*resp.word_ids[r]);
        for (std::size_t c = 0; c < t; ++c) {
          if (!resp.word_ids[c]) continue;
          result(wr, static_cast<std::size_t>(*resp.word_ids[c])) += sub(r, c);
        }
      }
      for (std::size_t w = 0; w < n; ++w) {
        auto row = result.row(w);
        if (mode == FromWordMode::kMean) {
          for (double& v : row) v /= static_cast<double>(pieces[w]);
        }
        double sum = 0.0;
        for (double v : row) sum += v;
        if (sum > 0.0) {
          for (double& v : row) v /= sum;
        } else {
          std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(n));
        }
      }
      words.push_back({std::move(result), layer, static_cast<int>(h), true});
    }
  }
  return out;
}

AttentionMatrix layer_average(std::span<const AttentionMatrix> heads) {
  if (heads.empty()) throw DataError("layer_average over zero heads");
  const std::size_t n = heads.front().n();
  const int layer = heads.front().layer;
  AttentionMatrix out{SquareMatrix(n), layer, kAveragedHead, true};
  for (const auto& m : heads) {
    if (m.n() != n) throw DataError("layer_average: matrix size mismatch");
    if (m.layer != layer) throw DataError("layer_average: mixed layers");
    out.row_stochastic = out.row_stochastic && m.row_stochastic;
    auto& dst = out.values.values();
    const auto& src = m.values.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const auto count = static_cast<double>(heads.size());
  for (double& v : out.values.values()) v /= count;
  return out;
}

AttentionMatrix symmetrize(const AttentionMatrix& m, SymmetrizeMode mode) {
  const std::size_t n = m.n();
  AttentionMatrix out{SquareMatrix(n), m.layer, m.head, false};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double a = m.values(i, j);
      const double b = m.values(j, i);
      out.values(i, j) = mode == SymmetrizeMode::kAvg ? (a + b) / 2.0
                                                      : std::max(a, b);
    }
  }
  return out;
}

SquareMatrix mean_matrix(std::span<const SquareMatrix> mats) {
  if (mats.empty()) throw DataError("mean over zero matrices");
  const std::size_t n = mats.front().size();
  SquareMatrix out(n);
  for (const auto& m : mats) {
    if (m.size() != n) throw DataError("mean: matrix size mismatch");
    for (std::size_t i = 0; i < n * n; ++i) out.values()[i] += m.values()[i];
  }
  const auto count = static_cast<double>(mats.size());
  for (double& v : out.values()) v /= count;
  return out;
}

double max_row_deviation(const SquareMatrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double sum = 0.0;
    for (double v : m.row(i)) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

}  // namespace dsm

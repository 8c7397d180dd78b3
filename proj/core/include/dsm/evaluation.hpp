#pragma once

// Scoring of induced trees against gold annotation, and layer × k sweeps.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsm/corpus.hpp"
#include "dsm/induction.hpp"
#include "dsm/provider.hpp"
#include "dsm/substitution.hpp"

namespace dsm {

struct EvalConfig {
  bool exclude_punct = true;
  Scheme scheme = Scheme::kUD;
  bool uuas = true;
  bool uas = false;
  bool las = false;
  bool relation_recall = true;
  // Sentence-averaged instead of edge-weighted corpus scores.
  bool macro = false;

  void validate() const;  // ConfigError when no metric is enabled
};

struct Count {
  std::size_t matched = 0;
  std::size_t total = 0;

  double ratio() const {
    return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
  }
  Count& operator+=(const Count& o) {
    matched += o.matched;
    total += o.total;
    return *this;
  }
  bool operator==(const Count&) const = default;
};

// Gold edges recovered by `predicted`, ignoring direction. The ROOT arc is not
// an edge; with exclude_punct, gold edges touching punctuation are skipped.
// Throws DataError on length mismatch.
Count uuas(const UndirectedTree& predicted, const Sentence& gold,
           const EvalConfig& cfg = {});

// Tree against tree: matched = shared edges, total = edges of `reference`.
Count uuas(const UndirectedTree& predicted, const UndirectedTree& reference);

// Per gold label, recovered edges over gold edges with that label. Labels
// absent from the gold corpus are absent from the map.
std::map<std::string, Count> relation_recall(std::span<const UndirectedTree> predicted,
                                             const Corpus& gold,
                                             const EvalConfig& cfg = {});

// (UAS, LAS) counts over words; punctuation words are skipped when
// exclude_punct. Labels compare without subtypes.
std::pair<Count, Count> uas_las(const DirectedTree& predicted, const Sentence& gold,
                                const EvalConfig& cfg = {});

enum class Metric { kUuas, kUas, kLas };

struct SentenceScore {
  std::string id;
  Count uuas;
  Count uas;
  Count las;
};

struct EvalReport {
  std::map<std::string, std::string> meta;
  EvalConfig config;
  Count uuas;
  Count uas;
  Count las;
  std::vector<SentenceScore> sentences;
  std::map<std::string, Count> relations;
  std::size_t skipped = 0;  // gold sentences without a usable tree

  double micro(Metric m) const;
  double macro(Metric m) const;
  // micro or macro per config.
  double score(Metric m) const { return config.macro ? macro(m) : micro(m); }
};

// Predicted and gold corpora must list the same sentences (id and words) in
// the same order; DataError otherwise.
EvalReport evaluate(const Corpus& gold, const Corpus& predicted,
                    const EvalConfig& cfg = {});

// ratio -> percentage with one decimal
std::string format_score(double ratio);

std::string report_tsv(const EvalReport& report);
std::string report_json(const EvalReport& report);

struct SweepCell {
  int layer = 0;
  std::size_t k = 0;
  std::optional<EvalReport> report;
  std::string error;  // set when the cell failed
};

struct SweepTable {
  std::map<std::string, std::string> meta;
  std::vector<int> layers;
  std::vector<std::size_t> ks;
  std::vector<SweepCell> cells;  // layer-major
  Metric metric = Metric::kUuas;

  const SweepCell* cell(int layer, std::size_t k) const;
};

struct SweepSpec {
  AggregationSpec aggregation;  // layer is overwritten per cell
  SubstitutionOptions substitution;
  FromWordMode from_word_mode = FromWordMode::kMean;
  std::string model;
  std::size_t workers = 1;
};

// One cell per (layer, k). Substitution sets are generated once per k, largest
// first so smaller k reuse cached candidates, and attention is fetched once
// per distinct sentence. A failing cell records its error; the rest go on.
SweepTable sweep(const Corpus& corpus, const std::vector<int>& layers,
                 const std::vector<std::size_t>& ks, const SweepSpec& spec,
                 Provider& provider, const EvalConfig& cfg,
                 CandidateCache* cache = nullptr);

// Rows are layers; columns k=0, then k and Δ against k=0 for each larger k.
std::string sweep_tsv(const SweepTable& table);
std::string sweep_json(const SweepTable& table);

}  // namespace dsm

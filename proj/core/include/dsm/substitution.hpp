#pragma once

// Substitution sets: sentences that differ from a target in exactly one
// open-class word, proposed by the masked language model.

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dsm/corpus.hpp"
#include "dsm/provider.hpp"

namespace dsm {

struct Variant {
  std::size_t position = 0;
  std::string replacement;
  std::vector<std::string> words;

  bool operator==(const Variant&) const = default;
};

struct SubstitutionSet {
  std::string id;
  std::vector<std::string> target;
  std::vector<std::string> target_upos;
  std::size_t k = 0;
  std::vector<std::size_t> eligible_positions;
  std::vector<Variant> variants;
  // Positions that ended with fewer than k surviving candidates.
  std::vector<std::size_t> shortfall;

  bool operator==(const SubstitutionSet&) const = default;
};

struct SubstitutionOptions {
  bool include_propn = true;
  // Re-tag each variant and keep it only if the substituted word keeps the
  // original UPOS.
  bool strict_pos = false;
  // Use the corpus UPOS column instead of querying the tagger.
  bool use_gold_upos = false;
  // Candidates requested per position: k + slack_factor * k.
  std::size_t slack_factor = 2;
};

std::vector<std::size_t> eligible_positions(
    const std::vector<std::string>& upos, bool include_propn = true);

// True for the candidates the filter rejects: the original word (case
// insensitive), pure punctuation or symbols, subword continuations.
bool reject_candidate(const std::string& candidate, const std::string& original);

// Top-k candidate lists keyed by (model, sentence, position). Because a
// top-m list is a prefix of any top-M list with M >= m, one stored list
// answers every smaller request. Thread-safe.
class CandidateCache {
 public:
  std::optional<std::vector<Candidate>> lookup(const std::string& model,
                                               const std::vector<std::string>& words,
                                               std::size_t position,
                                               std::size_t request_size) const;
  void store(const std::string& model, const std::vector<std::string>& words,
             std::size_t position, std::size_t request_size,
             std::vector<Candidate> candidates);

  std::size_t size() const;
  void load(const std::string& path);  // missing file is not an error
  void save(const std::string& path) const;

 private:
  struct Entry {
    std::size_t request_size = 0;
    std::vector<Candidate> candidates;
  };
  using Key = std::tuple<std::string, std::string, std::size_t>;
  mutable std::mutex mu_;
  std::map<Key, Entry> entries_;
};

// Builds the substitution set of `target` with up to k variants per eligible
// position. Provider failures propagate.
SubstitutionSet generate_substitutions(const Sentence& target, std::size_t k,
                                       Provider& provider,
                                       const SubstitutionOptions& options = {},
                                       CandidateCache* cache = nullptr,
                                       const std::string& model = {});

// The target as an unannotated sentence carrying the set's id and tags.
Sentence target_sentence(const SubstitutionSet& set);

// JSON lines: one object per target sentence.
std::string substitution_to_json(const SubstitutionSet& set);
SubstitutionSet substitution_from_json(const std::string& line);

}  // namespace dsm

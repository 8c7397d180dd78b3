#pragma once

// Deterministic offline backend. Every answer is a pure function of the seed
// and the request, so pipelines can be tested without a model.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dsm/provider.hpp"

namespace dsm {

struct FixtureOptions {
  std::uint64_t seed = 0;
  int layers = 12;
  int heads = 12;
  std::string model = "fixture";
  // Split words longer than six characters into two subwords and wrap the
  // sequence in [CLS]/[SEP], mimicking a wordpiece tokenizer.
  bool split_subwords = false;
};

// One subword per word, rows drawn from a keyed hash of
// (seed, words, layer, head, row) and normalized to sum to 1.
ModelResponse fixture_attention(const std::vector<std::string>& words,
                                const std::vector<int>& layers, int heads,
                                std::uint64_t seed);

ModelResponse fixture_attention(const std::vector<std::string>& words,
                                const std::vector<int>& layers,
                                const FixtureOptions& options);

// Lexicon-and-suffix tagger used by the fixture's upos op.
std::string fixture_upos(const std::string& word, bool sentence_initial);

class FixtureProvider : public Provider {
 public:
  explicit FixtureProvider(FixtureOptions options = {});

  // Pins the mlm_topk answer for (sentence text, position); the first k
  // entries are returned.
  void freeze_candidates(const std::vector<std::string>& words,
                         std::size_t position, std::vector<Candidate> list);

  Handshake hello() override;
  ModelResponse request(const ModelRequest& req) override;

  const FixtureOptions& options() const { return options_; }

 private:
  std::vector<Candidate> topk(const ModelRequest& req) const;

  FixtureOptions options_;
  std::map<std::pair<std::string, std::size_t>, std::vector<Candidate>>
      frozen_;
};

}  // namespace dsm

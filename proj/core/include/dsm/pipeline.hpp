#pragma once

// Experiment configuration and the subcommands that chain substitution,
// extraction, induction and evaluation through files in an output directory.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dsm/attention.hpp"
#include "dsm/corpus.hpp"
#include "dsm/error.hpp"
#include "dsm/evaluation.hpp"
#include "dsm/provider.hpp"
#include "dsm/substitution.hpp"

namespace dsm {

struct ProviderConfig {
  std::string kind = "fixture";  // fixture | sidecar
  std::uint64_t seed = 0;
  int layers = 12;
  int heads = 12;
  bool split_subwords = false;
  std::string command;  // sidecar
  double timeout_s = 120.0;
};

struct CorpusConfig {
  std::string ud;   // CoNLL-U
  std::string sud;  // CoNLL-U over the same sentences
  std::string raw;  // one sentence per line; used when ud is empty
  std::optional<std::size_t> max_length;
  bool count_punct_in_length = true;
  std::size_t limit = 0;  // 0 = all
};

struct HeadselConfig {
  std::string selection;  // CoNLL-U, disjoint from the evaluation corpus
  std::size_t max_selection = 1000;
  std::vector<std::string> labels;  // empty = all labels present
  std::vector<std::size_t> k_values{0, 1, 3, 5};
  std::vector<int> layers;  // empty = every layer of the model
  bool gold_root = false;
};

struct AgreementConfig {
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::vector<std::size_t> k_values{0, 10};
};

struct ExperimentConfig {
  std::string model = "fixture";
  ProviderConfig provider;
  CorpusConfig corpus;
  std::vector<int> layers{10};
  std::string head_mode = "layer_average";
  std::vector<std::size_t> k_values{0, 1, 3, 5, 10};
  bool include_target = true;
  SymmetrizeMode symmetrize = SymmetrizeMode::kAvg;
  FromWordMode from_word_mode = FromWordMode::kMean;
  SubstitutionOptions substitution;
  EvalConfig eval;
  HeadselConfig headsel;
  AgreementConfig agreement;
  std::string output_dir = "dsm-out";
  std::string cache_dir;  // default: <output_dir>/cache
  std::string archive;    // default: <output_dir>/attention.dsma
  std::size_t workers = 1;
};

// JSON; omitted keys keep their defaults, unknown keys are a ConfigError.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::string& path);
// Every key, canonical order.
std::string config_to_json(const ExperimentConfig& cfg);
// Hash of the canonical config without output_dir, cache_dir, archive and
// workers, which do not change results.
std::string config_hash(const ExperimentConfig& cfg);

enum class Stage { kSubstitute, kExtract, kInduce, kEval, kSweep, kAgreement, kHeadsel };

// Hash of the config keys a stage's outputs depend on, including those of the
// stages it reads from. Rescoring the same trees under another eval scheme
// leaves the induce hash unchanged.
std::string stage_hash(const ExperimentConfig& cfg, Stage stage);
// DSM_CACHE_DIR -> cache_dir; DSM_SIDECAR_CMD -> sidecar provider command.
void apply_env_overrides(ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

std::unique_ptr<Provider> make_provider(const ExperimentConfig& cfg);

// 0 ok, 1 internal, 2 config, 3 missing artifact, 4 provider, 5 parse/data,
// 6 archive.
int exit_code(ErrorKind kind);

class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg, std::ostream* log = nullptr);
  ~Pipeline();

  void substitute();
  void extract();
  void induce();
  void eval();
  void sweep();
  void agreement();
  void headsel();

  const ExperimentConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }
  std::string hash(Stage stage) const { return stage_hash(cfg_, stage); }
  std::string path(const std::string& name) const;
  // Outputs left untouched because they already carried this config's hash.
  std::size_t skipped_outputs() const { return skipped_; }

  static std::string substitutions_name(std::size_t k);
  static std::string trees_name(int layer, std::size_t k);
  static std::string eval_name(Scheme scheme, int layer, std::size_t k, std::string_view ext);

 private:
  Provider& provider();
  std::map<std::string, std::string> provenance(Stage stage);
  const Corpus& corpus();
  Corpus gold(Scheme scheme);
  std::string cache_path(const std::string& name) const;
  std::string archive_path() const;
  bool up_to_date(const std::vector<std::string>& paths, Stage stage);
  void require(const std::string& path, Stage producer) const;
  void write(const std::string& path, const std::string& content);
  std::vector<SubstitutionSet> read_substitutions(std::size_t k) const;
  std::vector<SubstitutionSet> generate(const Corpus& corpus, std::size_t k,
                                        CandidateCache& cache);
  void log(const std::string& line);

  ExperimentConfig cfg_;
  std::string hash_;
  std::ostream* log_;
  std::unique_ptr<Provider> provider_;
  std::optional<Corpus> corpus_;
  std::vector<std::size_t> kept_;  // corpus_ positions in the unfiltered file
  std::size_t skipped_ = 0;
};

}  // namespace dsm

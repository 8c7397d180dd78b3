#include "dsm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dsm/agreement.hpp"
#include "dsm/archive.hpp"
#include "dsm/fixture_provider.hpp"
#include "dsm/hash.hpp"
#include "dsm/headsel.hpp"
#include "dsm/induction.hpp"
#include "dsm/parallel.hpp"
#include "dsm/sidecar_client.hpp"
#include "json.hpp"

namespace dsm {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;
using Meta = std::map<std::string, std::string>;

namespace {

const char* const kTable5Labels[] = {"nsubj", "obj", "det", "case"};

std::string_view from_word_name(FromWordMode m) {
  return m == FromWordMode::kMean ? "mean" : "sum";
}

void merge(json& base, const json& in, const std::string& where) {
  if (!in.is_object()) throw ConfigError("config" + where + " must be an object");
  for (const auto& [key, value] : in.items()) {
    const std::string path = where + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path.substr(1) + "'");
    if (base[key].is_object()) {
      merge(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

std::vector<std::size_t> count_list(const json& j, const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(key + " must hold non-negative integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string meta_comment(const Meta& meta) {
  std::string line = "#";
  for (const auto& [k, v] : meta) line += " " + k + "=" + v;
  return line + "\n";
}

// Inverse of meta_comment, given the comment text without "# ".
Meta parse_meta(std::string_view text) {
  Meta meta;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return meta;
}

Meta with(Meta meta, std::initializer_list<std::pair<const std::string, std::string>> extra) {
  for (const auto& [k, v] : extra) meta[k] = v;
  return meta;
}

json to_json(const ExperimentConfig& c) {
  return json{
      {"model", c.model},
      {"provider",
       {{"kind", c.provider.kind},
        {"seed", c.provider.seed},
        {"layers", c.provider.layers},
        {"heads", c.provider.heads},
        {"split_subwords", c.provider.split_subwords},
        {"command", c.provider.command},
        {"timeout_s", c.provider.timeout_s}}},
      {"corpus",
       {{"ud", c.corpus.ud},
        {"sud", c.corpus.sud},
        {"raw", c.corpus.raw},
        {"max_length", c.corpus.max_length ? json(*c.corpus.max_length) : json(nullptr)},
        {"count_punct_in_length", c.corpus.count_punct_in_length},
        {"limit", c.corpus.limit}}},
      {"layers", c.layers},
      {"head_mode", c.head_mode},
      {"k_values", c.k_values},
      {"include_target", c.include_target},
      {"symmetrize", std::string(to_string(c.symmetrize))},
      {"from_word_mode", std::string(from_word_name(c.from_word_mode))},
      {"substitution",
       {{"include_propn", c.substitution.include_propn},
        {"strict_pos", c.substitution.strict_pos},
        {"use_gold_upos", c.substitution.use_gold_upos},
        {"slack_factor", c.substitution.slack_factor}}},
      {"eval",
       {{"exclude_punct", c.eval.exclude_punct},
        {"scheme", std::string(to_string(c.eval.scheme))},
        {"uuas", c.eval.uuas},
        {"uas", c.eval.uas},
        {"las", c.eval.las},
        {"relation_recall", c.eval.relation_recall},
        {"macro", c.eval.macro}}},
      {"headsel",
       {{"selection", c.headsel.selection},
        {"max_selection", c.headsel.max_selection},
        {"labels", c.headsel.labels},
        {"k_values", c.headsel.k_values},
        {"layers", c.headsel.layers},
        {"gold_root", c.headsel.gold_root}}},
      {"agreement",
       {{"count", c.agreement.count},
        {"seed", c.agreement.seed},
        {"k_values", c.agreement.k_values}}},
      {"output_dir", c.output_dir},
      {"cache_dir", c.cache_dir},
      {"archive", c.archive},
      {"workers", c.workers},
  };
}

}  // namespace

ExperimentConfig config_from_json(std::string_view text) {
  json j = to_json(ExperimentConfig{});
  try {
    merge(j, json::parse(text), "");
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.model = j["model"].get<std::string>();
    const json& p = j["provider"];
    c.provider.kind = p["kind"].get<std::string>();
    c.provider.seed = p["seed"].get<std::uint64_t>();
    c.provider.layers = p["layers"].get<int>();
    c.provider.heads = p["heads"].get<int>();
    c.provider.split_subwords = p["split_subwords"].get<bool>();
    c.provider.command = p["command"].get<std::string>();
    c.provider.timeout_s = p["timeout_s"].get<double>();
    const json& cj = j["corpus"];
    c.corpus.ud = cj["ud"].get<std::string>();
    c.corpus.sud = cj["sud"].get<std::string>();
    c.corpus.raw = cj["raw"].get<std::string>();
    if (!cj["max_length"].is_null()) {
      c.corpus.max_length = count_list(json::array({cj["max_length"]}), "corpus.max_length")[0];
    }
    c.corpus.count_punct_in_length = cj["count_punct_in_length"].get<bool>();
    c.corpus.limit = count_list(json::array({cj["limit"]}), "corpus.limit")[0];
    c.layers = j["layers"].get<std::vector<int>>();
    c.head_mode = j["head_mode"].get<std::string>();
    c.k_values = count_list(j["k_values"], "k_values");
    c.include_target = j["include_target"].get<bool>();
    c.symmetrize = symmetrize_mode_from_string(j["symmetrize"].get<std::string>());
    c.from_word_mode = from_word_mode_from_string(j["from_word_mode"].get<std::string>());
    const json& s = j["substitution"];
    c.substitution.include_propn = s["include_propn"].get<bool>();
    c.substitution.strict_pos = s["strict_pos"].get<bool>();
    c.substitution.use_gold_upos = s["use_gold_upos"].get<bool>();
    c.substitution.slack_factor =
        count_list(json::array({s["slack_factor"]}), "substitution.slack_factor")[0];
    const json& e = j["eval"];
    c.eval.exclude_punct = e["exclude_punct"].get<bool>();
    c.eval.scheme = scheme_from_string(e["scheme"].get<std::string>());
    c.eval.uuas = e["uuas"].get<bool>();
    c.eval.uas = e["uas"].get<bool>();
    c.eval.las = e["las"].get<bool>();
    c.eval.relation_recall = e["relation_recall"].get<bool>();
    c.eval.macro = e["macro"].get<bool>();
    const json& h = j["headsel"];
    c.headsel.selection = h["selection"].get<std::string>();
    c.headsel.max_selection =
        count_list(json::array({h["max_selection"]}), "headsel.max_selection")[0];
    c.headsel.labels = h["labels"].get<std::vector<std::string>>();
    c.headsel.k_values = count_list(h["k_values"], "headsel.k_values");
    c.headsel.layers = h["layers"].get<std::vector<int>>();
    c.headsel.gold_root = h["gold_root"].get<bool>();
    const json& a = j["agreement"];
    c.agreement.count = count_list(json::array({a["count"]}), "agreement.count")[0];
    c.agreement.seed = a["seed"].get<std::uint64_t>();
    c.agreement.k_values = count_list(a["k_values"], "agreement.k_values");
    c.output_dir = j["output_dir"].get<std::string>();
    c.cache_dir = j["cache_dir"].get<std::string>();
    c.archive = j["archive"].get<std::string>();
    c.workers = count_list(json::array({j["workers"]}), "workers")[0];
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return config_from_json(s.str());
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  for (const char* k : {"output_dir", "cache_dir", "archive", "workers"}) j.erase(k);
  return hex64(StableHasher().add_string(j.dump()).digest());
}

std::string stage_hash(const ExperimentConfig& cfg, Stage stage) {
  static const std::vector<const char*> substitute{"model", "provider", "corpus", "k_values",
                                                   "substitution"};
  std::vector<const char*> keys;
  const char* name = "";
  switch (stage) {
    case Stage::kSubstitute:
      keys = substitute;
      name = "substitute";
      break;
    case Stage::kExtract:
      keys = substitute;
      keys.insert(keys.end(), {"layers", "from_word_mode"});
      name = "extract";
      break;
    case Stage::kInduce:
    case Stage::kEval:
    case Stage::kSweep:
      keys = substitute;
      keys.insert(keys.end(),
                  {"layers", "from_word_mode", "head_mode", "include_target", "symmetrize"});
      if (stage != Stage::kInduce) keys.push_back("eval");
      name = stage == Stage::kInduce ? "induce" : stage == Stage::kEval ? "eval" : "sweep";
      break;
    case Stage::kAgreement:
      keys = {"model", "provider", "layers", "head_mode", "include_target", "symmetrize",
              "from_word_mode", "substitution", "agreement"};
      name = "agreement";
      break;
    case Stage::kHeadsel:
      keys = {"model", "provider", "corpus", "substitution", "from_word_mode",
              "include_target", "headsel", "eval"};
      name = "headsel";
      break;
  }
  const json all = to_json(cfg);
  json picked = json::object();
  for (const char* k : keys) picked[k] = all[k];
  return hex64(StableHasher().add_string(name).add_string(picked.dump()).digest());
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* dir = std::getenv("DSM_CACHE_DIR"); dir && *dir) cfg.cache_dir = dir;
  if (const char* cmd = std::getenv("DSM_SIDECAR_CMD"); cmd && *cmd) {
    cfg.provider.kind = "sidecar";
    cfg.provider.command = cmd;
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.layers.empty()) throw ConfigError("layers must not be empty");
  for (int l : cfg.layers) {
    if (l < 0) throw ConfigError("layer indices must be non-negative");
  }
  if (cfg.k_values.empty()) throw ConfigError("k_values must not be empty");
  HeadMode::parse(cfg.head_mode);
  cfg.eval.validate();
  if (cfg.provider.kind != "fixture" && cfg.provider.kind != "sidecar") {
    throw ConfigError("provider.kind must be fixture or sidecar");
  }
  if (cfg.provider.kind == "sidecar" && cfg.provider.command.empty()) {
    throw ConfigError("provider.command is required for the sidecar provider");
  }
  if (cfg.provider.layers < 1 || cfg.provider.heads < 1) {
    throw ConfigError("provider.layers and provider.heads must be positive");
  }
  if (!(cfg.provider.timeout_s > 0)) throw ConfigError("provider.timeout_s must be positive");
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  if (cfg.agreement.count < 1) throw ConfigError("agreement.count must be at least 1");
  if (cfg.corpus.max_length && *cfg.corpus.max_length < 1) {
    throw ConfigError("corpus.max_length must be at least 1");
  }
  for (const auto* p : {&cfg.corpus.ud, &cfg.corpus.sud, &cfg.corpus.raw, &cfg.headsel.selection}) {
    if (!p->empty() && !fs::exists(*p)) throw ConfigError("path does not exist: " + *p);
  }
}

std::unique_ptr<Provider> make_provider(const ExperimentConfig& cfg) {
  std::unique_ptr<Provider> p;
  if (cfg.provider.kind == "fixture") {
    FixtureOptions o;
    o.seed = cfg.provider.seed;
    o.layers = cfg.provider.layers;
    o.heads = cfg.provider.heads;
    o.model = cfg.model;
    o.split_subwords = cfg.provider.split_subwords;
    p = std::make_unique<FixtureProvider>(o);
  } else {
    p = std::make_unique<SidecarClient>(
        cfg.provider.command,
        std::chrono::milliseconds(static_cast<long long>(cfg.provider.timeout_s * 1000)));
  }
  const Handshake hs = p->hello();
  if (hs.model != cfg.model) {
    throw ConfigError("provider serves model '" + hs.model + "', config asks for '" +
                      cfg.model + "'");
  }
  for (int l : cfg.layers) {
    if (l >= hs.layers) {
      throw ConfigError("layer " + std::to_string(l) + " outside model depth " +
                        std::to_string(hs.layers));
    }
  }
  return p;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInternal:
      return 1;
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kMissingArtifact:
      return 3;
    case ErrorKind::kProvider:
      return 4;
    case ErrorKind::kParse:
    case ErrorKind::kData:
      return 5;
    case ErrorKind::kArchive:
      return 6;
  }
  return 1;
}

Pipeline::Pipeline(ExperimentConfig cfg, std::ostream* log)
    : cfg_(std::move(cfg)), hash_(config_hash(cfg_)), log_(log) {
  validate_config(cfg_);
  if (cfg_.cache_dir.empty()) cfg_.cache_dir = (fs::path(cfg_.output_dir) / "cache").string();
  fs::create_directories(cfg_.output_dir);
  fs::create_directories(cfg_.cache_dir);
}

Pipeline::~Pipeline() = default;

std::string Pipeline::path(const std::string& name) const {
  return (fs::path(cfg_.output_dir) / name).string();
}

std::string Pipeline::cache_path(const std::string& name) const {
  return (fs::path(cfg_.cache_dir) / name).string();
}

std::string Pipeline::archive_path() const {
  return cfg_.archive.empty() ? path("attention.dsma") : cfg_.archive;
}

std::string Pipeline::substitutions_name(std::size_t k) {
  return "substitutions.k" + std::to_string(k) + ".jsonl";
}

std::string Pipeline::trees_name(int layer, std::size_t k) {
  return "trees.L" + std::to_string(layer) + ".k" + std::to_string(k) + ".conllu";
}

std::string Pipeline::eval_name(Scheme scheme, int layer, std::size_t k, std::string_view ext) {
  return "eval." + std::string(to_string(scheme)) + ".L" + std::to_string(layer) + ".k" +
         std::to_string(k) + "." + std::string(ext);
}

void Pipeline::log(const std::string& line) {
  if (log_) *log_ << "dsm: " << line << '\n';
}

Provider& Pipeline::provider() {
  if (!provider_) provider_ = make_provider(cfg_);
  return *provider_;
}

Meta Pipeline::provenance(Stage stage) {
  const Handshake hs = provider().hello();
  return {{"config_hash", hash(stage)},
          {"model", hs.model},
          {"model_layers", std::to_string(hs.layers)},
          {"model_heads", std::to_string(hs.heads)}};
}

const Corpus& Pipeline::corpus() {
  if (corpus_) return *corpus_;
  Corpus all;
  if (!cfg_.corpus.ud.empty()) {
    ConlluResult r = read_conllu_file(cfg_.corpus.ud);
    for (const auto& w : r.warnings) log(cfg_.corpus.ud + ": " + w);
    all = std::move(r.sentences);
  } else if (!cfg_.corpus.raw.empty()) {
    std::ifstream in(cfg_.corpus.raw);
    if (!in) throw DataError("cannot read " + cfg_.corpus.raw);
    all = read_raw_sentences(in);
  } else {
    throw ConfigError("corpus.ud or corpus.raw is required");
  }
  CorpusFilter filter{cfg_.corpus.max_length, cfg_.corpus.count_punct_in_length};
  filter_corpus({}, filter);  // validates the filter
  Corpus kept;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (cfg_.corpus.limit && kept.size() == cfg_.corpus.limit) break;
    if (filter.max_length &&
        counted_length(all[i], filter.count_punct_in_length) > *filter.max_length) {
      continue;
    }
    kept.push_back(std::move(all[i]));
    kept_.push_back(i);
  }
  corpus_ = std::move(kept);
  return *corpus_;
}

Corpus Pipeline::gold(Scheme scheme) {
  const Corpus& ud = corpus();
  if (scheme == Scheme::kUD) return ud;
  if (cfg_.corpus.sud.empty()) throw ConfigError("eval.scheme SUD needs corpus.sud");
  ConlluResult sud = read_conllu_file(cfg_.corpus.sud);
  for (const auto& w : sud.warnings) log(cfg_.corpus.sud + ": " + w);
  ConlluResult full = read_conllu_file(cfg_.corpus.ud);
  check_aligned(full.sentences, sud.sentences);
  Corpus out;
  for (std::size_t i : kept_) out.push_back(std::move(sud.sentences[i]));
  return out;
}

bool Pipeline::up_to_date(const std::vector<std::string>& paths, Stage stage) {
  const std::string h = hash(stage);
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return false;
    std::string head(4096, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    if (head.find(h) == std::string::npos) return false;
  }
  skipped_ += paths.size();
  for (const auto& p : paths) log("up to date: " + p);
  return true;
}

void Pipeline::require(const std::string& p, Stage producer) const {
  static const std::map<Stage, std::string> names{{Stage::kSubstitute, "substitute"},
                                                  {Stage::kExtract, "extract"},
                                                  {Stage::kInduce, "induce"}};
  const std::string& name = names.at(producer);
  const std::string h = hash(producer);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifactError(p, name);
  std::string head(4096, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (head.find(h) == std::string::npos) {
    throw MissingArtifactError(p + " for config " + h, name);
  }
}

void Pipeline::write(const std::string& p, const std::string& content) {
  const std::string tmp = p + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp);
    out << content;
    if (!out) throw DataError("write failed: " + tmp);
  }
  fs::rename(tmp, p);
  log("wrote " + p);
}

std::vector<SubstitutionSet> Pipeline::generate(const Corpus& corpus, std::size_t k,
                                                CandidateCache& cache) {
  std::vector<SubstitutionSet> sets(corpus.size());
  Provider& prov = provider();
  parallel_for(corpus.size(), cfg_.workers, [&](std::size_t i) {
    try {
      sets[i] = generate_substitutions(corpus[i], k, prov, cfg_.substitution, &cache, cfg_.model);
    } catch (const Error& e) {
      throw SentenceError(corpus[i].id, e);
    }
  });
  return sets;
}

std::vector<SubstitutionSet> Pipeline::read_substitutions(std::size_t k) const {
  const std::string p = path(substitutions_name(k));
  require(p, Stage::kSubstitute);
  std::ifstream in(p);
  std::vector<SubstitutionSet> sets;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("{\"meta\"", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    sets.push_back(substitution_from_json(line));
  }
  return sets;
}

void Pipeline::substitute() {
  std::vector<std::size_t> ks = cfg_.k_values;
  std::sort(ks.rbegin(), ks.rend());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<std::string> outs;
  for (std::size_t k : ks) outs.push_back(path(substitutions_name(k)));
  if (up_to_date(outs, Stage::kSubstitute)) return;

  const Corpus& c = corpus();
  CandidateCache cache;
  const std::string cache_file = cache_path("candidates.jsonl");
  cache.load(cache_file);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto sets = generate(c, ks[i], cache);
    std::string content =
        json{{"meta", with(provenance(Stage::kSubstitute), {{"k", std::to_string(ks[i])}})}}.dump() + "\n";
    for (const auto& s : sets) content += substitution_to_json(s) + "\n";
    write(outs[i], content);
  }
  cache.save(cache_file);
}

void Pipeline::extract() {
  const std::string out = archive_path();
  if (up_to_date({out}, Stage::kExtract)) return;

  std::vector<std::vector<std::string>> sentences;
  std::set<std::string> seen;
  for (std::size_t k : cfg_.k_values) {
    for (const auto& set : read_substitutions(k)) {
      if (seen.insert(sentence_key(set.target)).second) sentences.push_back(set.target);
      for (const auto& v : set.variants) {
        if (seen.insert(sentence_key(v.words)).second) sentences.push_back(v.words);
      }
    }
  }

  const Handshake hs = provider().hello();
  ArchiveHeader header{hs.model, cfg_.layers, hs.heads, {}};

  // Attention already fetched under the same model, provider and layers.
  json key = to_json(cfg_)["provider"];
  key["model"] = cfg_.model;
  key["layers"] = cfg_.layers;
  key["from_word_mode"] = std::string(from_word_name(cfg_.from_word_mode));
  if (cfg_.provider.kind == "sidecar") key.erase("seed");
  const std::string cache_file =
      cache_path("attention-" + hex64(StableHasher().add_string(key.dump()).digest()) + ".dsma");
  std::map<std::string, ArchiveRecord> cached;
  if (fs::exists(cache_file)) {
    try {
      Archive a = read_archive_file(cache_file);
      if (a.header() == header) {
        for (const auto& r : a.records()) cached.emplace(sentence_key(r.words), r);
      }
    } catch (const ArchiveError& e) {
      log("ignoring unreadable attention cache " + cache_file + ": " + e.what());
    }
  }

  std::vector<ArchiveRecord> records(sentences.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto it = cached.find(sentence_key(sentences[i]));
    if (it != cached.end()) {
      records[i] = it->second;
    } else {
      missing.push_back(i);
    }
  }
  log("attention: " + std::to_string(sentences.size() - missing.size()) + " cached, " +
      std::to_string(missing.size()) + " to fetch");
  Provider& prov = provider();
  parallel_for(missing.size(), cfg_.workers, [&](std::size_t m) {
    const auto& words = sentences[missing[m]];
    records[missing[m]] =
        make_record(words, reduce_to_words(prov.attention(words, cfg_.layers), cfg_.from_word_mode),
                    header);
  });

  for (std::size_t i : missing) cached.emplace(sentence_key(records[i].words), records[i]);
  std::vector<ArchiveRecord> all;
  all.reserve(cached.size());
  for (auto& [k, r] : cached) all.push_back(std::move(r));
  write_archive_file(cache_file + ".tmp", header, all);
  fs::rename(cache_file + ".tmp", cache_file);

  ArchiveHeader out_header = header;
  out_header.meta = provenance(Stage::kExtract);
  write_archive_file(out + ".tmp", out_header, records);
  fs::rename(out + ".tmp", out);
  log("wrote " + out);
}

void Pipeline::induce() {
  std::vector<std::string> outs;
  for (int layer : cfg_.layers) {
    for (std::size_t k : cfg_.k_values) outs.push_back(path(trees_name(layer, k)));
  }
  if (up_to_date(outs, Stage::kInduce)) return;

  const std::string ap = archive_path();
  require(ap, Stage::kExtract);
  const Archive archive = read_archive_file(ap);
  ArchiveAttentionSource source(archive);
  Meta meta = archive.header().meta;
  meta["config_hash"] = hash(Stage::kInduce);

  for (std::size_t k : cfg_.k_values) {
    const auto sets = read_substitutions(k);
    for (int layer : cfg_.layers) {
      AggregationSpec spec{cfg_.include_target, layer, HeadMode::parse(cfg_.head_mode),
                           cfg_.symmetrize};
      Corpus predicted(sets.size());
      parallel_for(sets.size(), cfg_.workers, [&](std::size_t i) {
        const Induction ind = dsm::induce(sets[i], spec, source);
        predicted[i] = predicted_sentence(target_sentence(sets[i]),
                                          orient(ind.tree, pseudo_root(ind.scores)));
      });
      write(path(trees_name(layer, k)),
            meta_comment(with(meta, {{"layer", std::to_string(layer)}, {"k", std::to_string(k)}})) +
                to_conllu(predicted));
    }
  }
}

void Pipeline::eval() {
  const Scheme scheme = cfg_.eval.scheme;
  const std::string summary = path("eval." + std::string(to_string(scheme)) + ".tsv");
  std::vector<std::string> outs{summary};
  for (int layer : cfg_.layers) {
    for (std::size_t k : cfg_.k_values) {
      outs.push_back(path(eval_name(scheme, layer, k, "tsv")));
      outs.push_back(path(eval_name(scheme, layer, k, "json")));
    }
  }
  if (up_to_date(outs, Stage::kEval)) return;

  // Check upstream before touching the corpus so a missing step is reported.
  for (int layer : cfg_.layers) {
    for (std::size_t k : cfg_.k_values) require(path(trees_name(layer, k)), Stage::kInduce);
  }
  const Corpus g = gold(scheme);
  SweepTable table;
  table.layers = cfg_.layers;
  table.ks = cfg_.k_values;
  for (int layer : cfg_.layers) {
    for (std::size_t k : cfg_.k_values) {
      Corpus predicted = parse_conllu(read_file(path(trees_name(layer, k)))).sentences;
      Meta meta;
      if (!predicted.empty() && !predicted.front().comments.empty()) {
        meta = parse_meta(predicted.front().comments.front());
      }
      meta["scheme"] = std::string(to_string(scheme));
      meta["config_hash"] = hash(Stage::kEval);
      EvalReport report = evaluate(g, predicted, cfg_.eval);
      report.meta = meta;
      write(path(eval_name(scheme, layer, k, "tsv")), report_tsv(report));
      write(path(eval_name(scheme, layer, k, "json")), report_json(report));
      meta.erase("layer");
      meta.erase("k");
      table.meta = meta;
      table.cells.push_back({layer, k, std::move(report), {}});
    }
  }
  write(summary, sweep_tsv(table));
}

void Pipeline::sweep() {
  const std::vector<std::string> outs{path("sweep.tsv"), path("sweep.json")};
  if (up_to_date(outs, Stage::kSweep)) return;
  const Corpus g = gold(cfg_.eval.scheme);
  CandidateCache cache;
  const std::string cache_file = cache_path("candidates.jsonl");
  cache.load(cache_file);
  SweepSpec spec;
  spec.aggregation = {cfg_.include_target, 0, HeadMode::parse(cfg_.head_mode), cfg_.symmetrize};
  spec.substitution = cfg_.substitution;
  spec.from_word_mode = cfg_.from_word_mode;
  spec.model = cfg_.model;
  spec.workers = cfg_.workers;
  SweepTable table = dsm::sweep(g, cfg_.layers, cfg_.k_values, spec, provider(), cfg_.eval, &cache);
  table.meta = with(provenance(Stage::kSweep), {{"scheme", std::string(to_string(cfg_.eval.scheme))}});
  for (const auto& c : table.cells) {
    if (!c.error.empty()) {
      log("cell layer=" + std::to_string(c.layer) + " k=" + std::to_string(c.k) +
          " failed: " + c.error);
    }
  }
  write(outs[0], sweep_tsv(table));
  write(outs[1], sweep_json(table));
  cache.save(cache_file);
}

void Pipeline::agreement() {
  const RcKind kinds[] = {RcKind::kObjectRc, RcKind::kSubjectRc};
  std::vector<std::string> outs{path("agreement.tsv"), path("agreement.json")};
  for (RcKind kind : kinds) outs.push_back(path("agreement." + std::string(to_string(kind)) + ".conllu"));
  if (up_to_date(outs, Stage::kAgreement)) return;

  const Meta meta = provenance(Stage::kAgreement);
  CandidateCache cache;
  const std::string cache_file = cache_path("candidates.jsonl");
  cache.load(cache_file);
  ProviderAttentionSource source(provider(), cfg_.layers, cfg_.from_word_mode);

  std::vector<std::size_t> ks = cfg_.agreement.k_values;
  std::ostringstream tsv;
  tsv << meta_comment(meta) << "kind\tlayer";
  for (std::size_t k : ks) tsv << "\tk=" << k;
  tsv << '\n';
  ojson cells = ojson::array();

  for (RcKind kind : kinds) {
    const auto items = generate_agreement(kind, cfg_.agreement.count, cfg_.agreement.seed);
    write(path("agreement." + std::string(to_string(kind)) + ".conllu"),
          meta_comment(with(meta, {{"kind", std::string(to_string(kind))}})) +
              agreement_to_conllu(items));
    Corpus sentences;
    for (const auto& it : items) sentences.push_back(it.sentence);
    std::map<std::pair<int, std::size_t>, double> recall;
    for (std::size_t k : ks) {
      const auto sets = generate(sentences, k, cache);
      for (int layer : cfg_.layers) {
        AggregationSpec spec{cfg_.include_target, layer, HeadMode::parse(cfg_.head_mode),
                             cfg_.symmetrize};
        std::vector<UndirectedTree> trees(sets.size());
        parallel_for(sets.size(), cfg_.workers,
                     [&](std::size_t i) { trees[i] = dsm::induce(sets[i], spec, source).tree; });
        recall[{layer, k}] = agreement_recall(trees, items);
      }
    }
    for (int layer : cfg_.layers) {
      tsv << to_string(kind) << '\t' << layer;
      for (std::size_t k : ks) {
        const double r = recall[{layer, k}];
        tsv << '\t' << format_score(r);
        cells.push_back({{"kind", std::string(to_string(kind))},
                         {"layer", layer},
                         {"k", k},
                         {"recall", r}});
      }
      tsv << '\n';
    }
  }
  tsv << "\nreference\tobject_rc\tsubject_rc\n"
      << "conditional_mi\t" << kReferenceMiObjectRc << '\t' << kReferenceMiSubjectRc << '\n';
  write(outs[0], tsv.str());
  write(outs[1],
        ojson{{"meta", meta},
              {"count", cfg_.agreement.count},
              {"seed", cfg_.agreement.seed},
              {"cells", std::move(cells)},
              {"reference",
               {{"conditional_mi",
                 {{"object_rc", kReferenceMiObjectRc}, {"subject_rc", kReferenceMiSubjectRc}}}}}}
                .dump(2) +
            "\n");
  cache.save(cache_file);
}

void Pipeline::headsel() {
  if (cfg_.headsel.selection.empty()) throw ConfigError("headsel.selection is required");
  std::vector<std::size_t> ks = cfg_.headsel.k_values;
  std::vector<std::string> outs{path("headsel.tsv"), path("headsel.json")};
  for (std::size_t k : ks) outs.push_back(path("heads.k" + std::to_string(k) + ".json"));
  if (up_to_date(outs, Stage::kHeadsel)) return;

  ConlluResult sel_file = read_conllu_file(cfg_.headsel.selection);
  for (const auto& w : sel_file.warnings) log(cfg_.headsel.selection + ": " + w);
  Corpus selection = std::move(sel_file.sentences);
  if (selection.size() > cfg_.headsel.max_selection) selection.resize(cfg_.headsel.max_selection);
  const Corpus evalc = gold(Scheme::kUD);
  std::set<std::string> eval_texts;
  for (const auto& s : evalc) eval_texts.insert(s.text());
  for (const auto& s : selection) {
    if (eval_texts.count(s.text())) {
      throw ConfigError("selection sentence " + s.id + " also appears in the evaluation corpus");
    }
  }

  const Handshake hs = provider().hello();
  std::vector<int> layers = cfg_.headsel.layers;
  if (layers.empty()) {
    for (int l = 0; l < hs.layers; ++l) layers.push_back(l);
  }
  for (int l : layers) {
    if (l < 0 || l >= hs.layers) throw ConfigError("headsel layer " + std::to_string(l) + " outside model");
  }
  const Meta meta = provenance(Stage::kHeadsel);
  ProviderAttentionSource source(provider(), layers, cfg_.from_word_mode);
  CandidateCache cache;
  const std::string cache_file = cache_path("candidates.jsonl");
  cache.load(cache_file);
  EvalConfig ecfg;
  ecfg.exclude_punct = cfg_.eval.exclude_punct;
  ecfg.uuas = false;
  ecfg.relation_recall = false;
  ecfg.uas = ecfg.las = true;
  ecfg.macro = cfg_.eval.macro;

  auto dsm_attention = [&](const std::vector<SubstitutionSet>& sets) {
    std::vector<LayerHeads> out(sets.size());
    parallel_for(sets.size(), cfg_.workers, [&](std::size_t i) {
      try {
        out[i] = substitution_attention(sets[i], source, cfg_.include_target);
      } catch (const Error& e) {
        throw SentenceError(sets[i].id, e);
      }
    });
    return out;
  };

  std::ostringstream tsv;
  tsv << meta_comment(meta) << "k";
  for (const char* l : kTable5Labels) tsv << '\t' << l;
  tsv << "\tuas\tlas\n";
  ojson rows = ojson::array();
  for (std::size_t k : ks) {
    HeadInventory inv;
    {
      const auto sel_att = dsm_attention(generate(selection, k, cache));
      inv = select_heads(selection, sel_att, cfg_.headsel.labels);
    }
    const auto ev_att = dsm_attention(generate(evalc, k, cache));

    ojson acc = ojson::object();
    tsv << k;
    for (const char* l : kTable5Labels) {
      std::optional<double> a;
      if (const HeadEntry* e = inv.find(l, Direction::kDepToParent)) {
        a = head_accuracy(evalc, ev_att, e->layer, e->head, l, Direction::kDepToParent);
      }
      tsv << '\t' << (a ? format_score(*a) : "n/a");
      acc[l] = a ? ojson(*a) : ojson(nullptr);
    }
    Corpus predicted(evalc.size());
    parallel_for(evalc.size(), cfg_.workers, [&](std::size_t i) {
      std::optional<std::size_t> root;
      if (cfg_.headsel.gold_root) {
        if (auto r = gold_tree(evalc[i]).root) root = *r;
      }
      const DirectedTree t = induce_directed(ev_att[i], inv, root);
      predicted[i] = predicted_sentence(evalc[i], t.heads, t.labels);
    });
    const EvalReport report = evaluate(evalc, predicted, ecfg);
    tsv << '\t' << format_score(report.score(Metric::kUas)) << '\t'
        << format_score(report.score(Metric::kLas)) << '\n';
    rows.push_back({{"k", k},
                    {"head_accuracy", std::move(acc)},
                    {"uas", report.score(Metric::kUas)},
                    {"las", report.score(Metric::kLas)}});
    write(path("heads.k" + std::to_string(k) + ".json"),
          ojson{{"meta", with(meta, {{"k", std::to_string(k)}})},
                {"inventory", ojson::parse(inventory_to_json(inv))}}
                  .dump(2) +
              "\n");
  }
  write(outs[0], tsv.str());
  write(outs[1], ojson{{"meta", meta},
                       {"selection_size", selection.size()},
                       {"rows", std::move(rows)}}
                         .dump(2) +
                     "\n");
  cache.save(cache_file);
}

}  // namespace dsm

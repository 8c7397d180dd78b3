#include "dsm/substitution.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "dsm/archive.hpp"
#include "dsm/error.hpp"
#include "json.hpp"

namespace dsm {

using nlohmann::json;

namespace {

const std::set<std::string>& open_classes() {
  static const std::set<std::string> tags = {"ADJ", "NOUN", "VERB", "ADV",
                                             "ADP", "DET"};
  return tags;
}

std::string lower(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::size_t> eligible_positions(const std::vector<std::string>& upos,
                                            bool include_propn) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < upos.size(); ++i) {
    if (open_classes().count(upos[i]) || (include_propn && upos[i] == "PROPN")) {
      out.push_back(i);
    }
  }
  return out;
}

bool reject_candidate(const std::string& candidate, const std::string& original) {
  if (candidate.empty()) return true;
  if (lower(candidate) == lower(original)) return true;
  if (candidate.rfind("##", 0) == 0) return true;
  const bool has_alnum = std::any_of(candidate.begin(), candidate.end(),
                                     [](unsigned char c) { return std::isalnum(c) != 0; });
  // Non-ASCII bytes count as letters so accented words survive.
  const bool has_high = std::any_of(candidate.begin(), candidate.end(),
                                    [](unsigned char c) { return c >= 0x80; });
  return !has_alnum && !has_high;
}

std::optional<std::vector<Candidate>> CandidateCache::lookup(
    const std::string& model, const std::vector<std::string>& words,
    std::size_t position, std::size_t request_size) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find({model, sentence_key(words), position});
  if (it == entries_.end() || it->second.request_size < request_size) {
    return std::nullopt;
  }
  const auto& all = it->second.candidates;
  const std::size_t m = std::min(request_size, all.size());
  return std::vector<Candidate>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
}

void CandidateCache::store(const std::string& model,
                           const std::vector<std::string>& words,
                           std::size_t position, std::size_t request_size,
                           std::vector<Candidate> candidates) {
  std::lock_guard lock(mu_);
  auto& e = entries_[{model, sentence_key(words), position}];
  if (e.request_size >= request_size && !e.candidates.empty()) return;
  e.request_size = request_size;
  e.candidates = std::move(candidates);
}

std::size_t CandidateCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void CandidateCache::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return;
  std::lock_guard lock(mu_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Entry e;
      e.request_size = j.at("request_size").get<std::size_t>();
      for (const auto& c : j.at("candidates")) {
        e.candidates.push_back({c.at(0).get<std::string>(), c.at(1).get<double>()});
      }
      entries_[{j.at("model").get<std::string>(), j.at("sentence").get<std::string>(),
                j.at("position").get<std::size_t>()}] = std::move(e);
    } catch (const json::exception& e) {
      throw ParseError(std::string("candidate cache ") + path + ": " + e.what(),
                       line_no);
    }
  }
}

void CandidateCache::save(const std::string& path) const {
  std::lock_guard lock(mu_);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write candidate cache " + path);
  for (const auto& [key, e] : entries_) {
    json cs = json::array();
    for (const auto& c : e.candidates) cs.push_back(json::array({c.word, c.logprob}));
    out << json{{"model", std::get<0>(key)},
                {"sentence", std::get<1>(key)},
                {"position", std::get<2>(key)},
                {"request_size", e.request_size},
                {"candidates", std::move(cs)}}
               .dump()
        << '\n';
  }
}

SubstitutionSet generate_substitutions(const Sentence& target, std::size_t k,
                                       Provider& provider,
                                       const SubstitutionOptions& options,
                                       CandidateCache* cache,
                                       const std::string& model) {
  SubstitutionSet set;
  set.id = target.id;
  set.target = target.words();
  set.k = k;
  set.target_upos = options.use_gold_upos ? target.upos() : provider.upos(set.target);
  if (set.target_upos.size() != set.target.size()) {
    throw DataError("tagger returned " + std::to_string(set.target_upos.size()) +
                    " tags for " + std::to_string(set.target.size()) + " words");
  }
  set.eligible_positions = eligible_positions(set.target_upos, options.include_propn);
  if (k == 0) return set;

  const std::size_t request_size = k + options.slack_factor * k;
  for (std::size_t pos : set.eligible_positions) {
    std::vector<Candidate> candidates;
    if (auto hit = cache ? cache->lookup(model, set.target, pos, request_size)
                         : std::nullopt) {
      candidates = std::move(*hit);
    } else {
      candidates = provider.mlm_topk(set.target, pos, request_size);
      if (cache) cache->store(model, set.target, pos, request_size, candidates);
    }

    const std::string& original = set.target[pos];
    std::size_t kept = 0;
    std::set<std::string> seen;
    for (const auto& c : candidates) {
      if (kept == k) break;
      if (reject_candidate(c.word, original)) continue;
      if (!seen.insert(lower(c.word)).second) continue;
      Variant v;
      v.position = pos;
      v.replacement = c.word;
      v.words = set.target;
      v.words[pos] = c.word;
      if (options.strict_pos) {
        const auto tags = provider.upos(v.words);
        if (tags.size() != v.words.size() || tags[pos] != set.target_upos[pos]) {
          continue;
        }
      }
      set.variants.push_back(std::move(v));
      ++kept;
    }
    if (kept < k) set.shortfall.push_back(pos);
  }
  return set;
}

Sentence target_sentence(const SubstitutionSet& set) {
  Sentence s;
  s.id = set.id;
  for (std::size_t i = 0; i < set.target.size(); ++i) {
    Token t;
    t.index = i;
    t.form = set.target[i];
    t.upos = i < set.target_upos.size() ? set.target_upos[i] : "_";
    t.is_punct = t.upos == "PUNCT";
    s.tokens.push_back(std::move(t));
  }
  s.usable = false;
  return s;
}

std::string substitution_to_json(const SubstitutionSet& set) {
  json vs = json::array();
  for (const auto& v : set.variants) {
    vs.push_back({{"position", v.position}, {"replacement", v.replacement},
                  {"words", v.words}});
  }
  return json{{"id", set.id},
              {"target", set.target},
              {"target_upos", set.target_upos},
              {"k", set.k},
              {"eligible_positions", set.eligible_positions},
              {"variants", std::move(vs)},
              {"shortfall", set.shortfall}}
      .dump();
}

SubstitutionSet substitution_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    SubstitutionSet set;
    set.id = j.at("id").get<std::string>();
    set.target = j.at("target").get<std::vector<std::string>>();
    set.target_upos = j.at("target_upos").get<std::vector<std::string>>();
    set.k = j.at("k").get<std::size_t>();
    set.eligible_positions = j.at("eligible_positions").get<std::vector<std::size_t>>();
    for (const auto& v : j.at("variants")) {
      set.variants.push_back({v.at("position").get<std::size_t>(),
                              v.at("replacement").get<std::string>(),
                              v.at("words").get<std::vector<std::string>>()});
    }
    set.shortfall = j.at("shortfall").get<std::vector<std::size_t>>();
    return set;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed substitution set: ") + e.what());
  }
}

}  // namespace dsm

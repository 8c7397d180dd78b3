#include "dsm/fixture_provider.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>
#include <string_view>
#include <unordered_map>

#include "dsm/error.hpp"
#include "dsm/hash.hpp"

namespace dsm {

namespace {

constexpr std::size_t kSplitThreshold = 6;

struct Subwords {
  std::vector<std::string> forms;
  std::vector<std::optional<int>> word_ids;
};

Subwords tokenize(const std::vector<std::string>& words, bool split) {
  Subwords out;
  if (split) {
    out.forms.push_back("[CLS]");
    out.word_ids.push_back(std::nullopt);
  }
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& word = words[w];
    if (split && word.size() > kSplitThreshold) {
      out.forms.push_back(word.substr(0, 4));
      out.word_ids.push_back(static_cast<int>(w));
      out.forms.push_back("##" + word.substr(4));
      out.word_ids.push_back(static_cast<int>(w));
    } else {
      out.forms.push_back(word);
      out.word_ids.push_back(static_cast<int>(w));
    }
  }
  if (split) {
    out.forms.push_back("[SEP]");
    out.word_ids.push_back(std::nullopt);
  }
  return out;
}

StableHasher sentence_hasher(std::uint64_t seed, std::string_view tag,
                             const std::vector<std::string>& words) {
  StableHasher h(seed);
  h.add_string(tag);
  h.add_u64(words.size());
  for (const auto& w : words) h.add_string(w);
  return h;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

// Replacement pool for mlm_topk. A few punctuation marks and continuation
// pieces are mixed in so the substitution filter has something to reject.
constexpr std::string_view kVocabulary[] = {
    "the",     "a",       "this",    "that",    "every",   "some",
    "his",     "her",     "their",   "my",      "in",      "on",
    "at",      "with",    "from",    "by",      "for",     "about",
    "into",    "under",   "over",    "after",   "man",     "woman",
    "child",   "kids",    "dog",     "city",    "house",   "car",
    "book",    "school",  "company", "market",  "people",  "year",
    "time",    "day",     "game",    "park",    "yard",    "ball",
    "teacher", "pilot",   "doctor",  "friend",  "run",     "walk",
    "see",     "like",    "love",    "know",    "think",   "make",
    "take",    "help",    "talk",    "stay",    "go",      "went",
    "saw",     "made",    "knew",    "figured", "said",    "found",
    "good",    "new",     "old",     "big",     "small",   "great",
    "long",    "young",   "happy",   "simple",  "just",    "always",
    "simply",  "only",    "really",  "often",   "never",   "also",
    "quickly", "still",   ".",       ",",       "!",       "?",
    "##s",     "##ing",   "##ed",    "##ly",    "'s",      "-"};

const std::unordered_map<std::string, std::string>& closed_lexicon() {
  static const std::unordered_map<std::string, std::string> lex = [] {
    std::unordered_map<std::string, std::string> m;
    auto add = [&](std::string_view tag, std::initializer_list<const char*> ws) {
      for (const char* w : ws) m.emplace(w, std::string(tag));
    };
    add("DET", {"the", "a", "an", "this", "these", "those", "every", "some",
                "no", "each", "his", "her", "their", "my", "your", "its",
                "our", "any", "all"});
    add("PRON", {"i", "you", "he", "she", "it", "we", "they", "me", "him",
                 "us", "them", "who", "what", "which", "that"});
    add("ADP", {"in", "on", "at", "with", "from", "by", "for", "of", "about",
                "into", "under", "over", "after", "before", "through",
                "during", "without", "between"});
    add("AUX", {"is", "are", "was", "were", "be", "been", "being", "'d",
                "will", "would", "can", "could", "should", "may", "might",
                "must", "has", "have", "had", "do", "does", "did", "'s",
                "'ll", "'re", "'m", "'ve"});
    add("CCONJ", {"and", "or", "but", "nor"});
    add("SCONJ", {"because", "if", "while", "although", "since", "whether"});
    add("PART", {"to", "not", "n't"});
    add("ADV", {"just", "very", "always", "simply", "only", "also", "never",
                "often", "still", "really", "here", "there", "now", "then",
                "too", "so"});
    add("VERB", {"run", "runs", "ran", "like", "likes", "know", "knows",
                 "knew", "think", "thinks", "thought", "figured", "see",
                 "saw", "go", "goes", "went", "make", "made", "take", "took",
                 "help", "talk", "stay", "love", "loves", "hate", "hates",
                 "admire", "admires", "laugh", "laughs", "swim", "swims",
                 "smile", "smiles", "cook", "cooks", "said", "say", "says",
                 "found", "find", "walk", "get", "got", "told", "tell",
                 "demand", "play", "plays"});
    add("ADJ", {"good", "new", "old", "big", "small", "great", "long",
                "young", "happy", "simple", "tall", "short", "bad", "little",
                "high", "large"});
    return m;
  }();
  return lex;
}

}  // namespace

ModelResponse fixture_attention(const std::vector<std::string>& words,
                                const std::vector<int>& layers, int heads,
                                std::uint64_t seed) {
  FixtureOptions options;
  options.seed = seed;
  options.heads = heads;
  return fixture_attention(words, layers, options);
}

ModelResponse fixture_attention(const std::vector<std::string>& words,
                                const std::vector<int>& layers,
                                const FixtureOptions& options) {
  const Subwords sub = tokenize(words, options.split_subwords);
  const std::size_t t = sub.forms.size();
  const StableHasher base = sentence_hasher(options.seed, "attention", words);

  ModelResponse resp;
  resp.subword_forms = sub.forms;
  resp.word_ids = sub.word_ids;
  for (int layer : layers) {
    std::vector<SquareMatrix> mats;
    mats.reserve(static_cast<std::size_t>(options.heads));
    for (int head = 0; head < options.heads; ++head) {
      SquareMatrix m(t);
      for (std::size_t i = 0; i < t; ++i) {
        StableHasher h = base;
        h.add_u64(static_cast<std::uint64_t>(layer));
        h.add_u64(static_cast<std::uint64_t>(head));
        h.add_u64(i);
        std::uint64_t state = h.digest();
        double sum = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          const double u = unit_interval(splitmix64(state));
          // Squaring skews rows toward a few dominant columns.
          m(i, j) = u * u + 1e-6;
          sum += m(i, j);
        }
        for (double& v : m.row(i)) v /= sum;
      }
      mats.push_back(std::move(m));
    }
    resp.attention.emplace(layer, std::move(mats));
  }
  return resp;
}

std::string fixture_upos(const std::string& word, bool sentence_initial) {
  if (word.empty()) return "X";
  if (std::all_of(word.begin(), word.end(), [](unsigned char c) {
        return std::ispunct(c) != 0;
      })) {
    return "PUNCT";
  }
  if (std::all_of(word.begin(), word.end(), [](unsigned char c) {
        return std::isdigit(c) != 0 || c == '.' || c == ',';
      })) {
    return "NUM";
  }
  const std::string w = lower(word);
  const auto& lex = closed_lexicon();
  if (auto it = lex.find(w); it != lex.end()) return it->second;
  if (!sentence_initial && std::isupper(static_cast<unsigned char>(word[0]))) {
    return "PROPN";
  }
  if (ends_with(w, "ly")) return "ADV";
  if (ends_with(w, "ed") || ends_with(w, "ing")) return "VERB";
  if (ends_with(w, "ous") || ends_with(w, "ful") || ends_with(w, "able") ||
      ends_with(w, "ive")) {
    return "ADJ";
  }
  return "NOUN";
}

FixtureProvider::FixtureProvider(FixtureOptions options)
    : options_(std::move(options)) {}

void FixtureProvider::freeze_candidates(const std::vector<std::string>& words,
                                        std::size_t position,
                                        std::vector<Candidate> list) {
  std::string key;
  for (const auto& w : words) key += w + ' ';
  frozen_[{key, position}] = std::move(list);
}

Handshake FixtureProvider::hello() {
  return {options_.model, options_.layers, options_.heads};
}

std::vector<Candidate> FixtureProvider::topk(const ModelRequest& req) const {
  std::string key;
  for (const auto& w : req.words) key += w + ' ';
  if (auto it = frozen_.find({key, req.position}); it != frozen_.end()) {
    const auto& list = it->second;
    return {list.begin(),
            list.begin() + static_cast<std::ptrdiff_t>(
                               std::min(req.k, list.size()))};
  }

  StableHasher base = sentence_hasher(options_.seed, "mlm_topk", req.words);
  base.add_u64(req.position);
  struct Scored {
    double score;
    std::string word;
  };
  std::vector<Scored> pool;
  auto score = [&](std::string_view w) {
    StableHasher h = base;
    h.add_string(w);
    return unit_interval(h.digest());
  };
  for (auto w : kVocabulary) pool.push_back({score(w), std::string(w)});
  // The masked word itself competes too, as it would in a real model.
  const std::string original = lower(req.words[req.position]);
  if (std::find(std::begin(kVocabulary), std::end(kVocabulary), original) ==
      std::end(kVocabulary)) {
    pool.push_back({score(original), original});
  }
  std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.word < b.word;
  });
  std::vector<Candidate> out;
  for (std::size_t r = 0; r < pool.size() && r < req.k; ++r) {
    out.push_back({pool[r].word, -0.5 * static_cast<double>(r + 1)});
  }
  return out;
}

ModelResponse FixtureProvider::request(const ModelRequest& req) {
  validate_request(req);
  ModelResponse resp;
  switch (req.op) {
    case Op::kAttention:
      for (int layer : req.layers) {
        if (layer < 0 || layer >= options_.layers) {
          throw BackendError("layer " + std::to_string(layer) +
                             " outside model depth " +
                             std::to_string(options_.layers));
        }
      }
      resp = fixture_attention(req.words, req.layers, options_);
      break;
    case Op::kMlmTopk:
      resp.candidates = topk(req);
      break;
    case Op::kUpos:
      for (std::size_t i = 0; i < req.words.size(); ++i) {
        resp.upos.push_back(fixture_upos(req.words[i], i == 0));
      }
      break;
  }
  resp.id = req.id;
  return resp;
}

}  // namespace dsm

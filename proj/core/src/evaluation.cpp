#include "dsm/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "dsm/error.hpp"
#include "dsm/headsel.hpp"
#include "dsm/parallel.hpp"
#include "json.hpp"

namespace dsm {

using json = nlohmann::ordered_json;

namespace {

bool touches_punct(const Sentence& s, const GoldArc& arc) {
  return s.tokens[arc.head].is_punct || s.tokens[arc.dep].is_punct;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kUuas:
      return "uuas";
    case Metric::kUas:
      return "uas";
    case Metric::kLas:
      return "las";
  }
  return "?";
}

const Count& pick(const SentenceScore& s, Metric m) {
  return m == Metric::kUuas ? s.uuas : m == Metric::kUas ? s.uas : s.las;
}

std::string meta_line(const std::map<std::string, std::string>& meta) {
  std::string line = "#";
  for (const auto& [k, v] : meta) line += " " + k + "=" + v;
  return line + "\n";
}

json count_json(const Count& c) {
  return {{"matched", c.matched}, {"total", c.total}};
}

}  // namespace

void EvalConfig::validate() const {
  if (!uuas && !uas && !las && !relation_recall) {
    throw ConfigError("evaluation needs at least one metric enabled");
  }
}

Count uuas(const UndirectedTree& predicted, const Sentence& gold, const EvalConfig& cfg) {
  if (predicted.n != gold.size()) {
    throw DataError("sentence " + gold.id + ": predicted tree has " +
                    std::to_string(predicted.n) + " words, gold has " +
                    std::to_string(gold.size()));
  }
  const std::set<Edge> edges(predicted.edges.begin(), predicted.edges.end());
  Count c;
  for (const auto& arc : gold_tree(gold).arcs) {
    if (cfg.exclude_punct && touches_punct(gold, arc)) continue;
    ++c.total;
    c.matched += edges.count(make_edge(arc.head, arc.dep));
  }
  return c;
}

Count uuas(const UndirectedTree& predicted, const UndirectedTree& reference) {
  if (predicted.n != reference.n) throw DataError("trees differ in size");
  const std::set<Edge> edges(predicted.edges.begin(), predicted.edges.end());
  Count c;
  for (const auto& e : reference.edges) {
    ++c.total;
    c.matched += edges.count(e);
  }
  return c;
}

std::map<std::string, Count> relation_recall(std::span<const UndirectedTree> predicted,
                                             const Corpus& gold, const EvalConfig& cfg) {
  if (predicted.size() != gold.size()) throw DataError("tree count differs from corpus size");
  std::map<std::string, Count> out;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (!gold[s].has_gold || !gold[s].usable) continue;
    if (predicted[s].n != gold[s].size()) throw DataError("sentence " + gold[s].id + ": length mismatch");
    const std::set<Edge> edges(predicted[s].edges.begin(), predicted[s].edges.end());
    for (const auto& arc : gold_tree(gold[s]).arcs) {
      if (cfg.exclude_punct && touches_punct(gold[s], arc)) continue;
      auto& c = out[arc.label];
      ++c.total;
      c.matched += edges.count(make_edge(arc.head, arc.dep));
    }
  }
  return out;
}

std::pair<Count, Count> uas_las(const DirectedTree& predicted, const Sentence& gold,
                                const EvalConfig& cfg) {
  if (predicted.n != gold.size() || predicted.heads.size() != gold.size()) {
    throw DataError("sentence " + gold.id + ": length mismatch");
  }
  Count uas, las;
  for (const auto& t : gold.tokens) {
    if (cfg.exclude_punct && t.is_punct) continue;
    ++uas.total;
    ++las.total;
    if (predicted.heads[t.index] != t.head) continue;
    ++uas.matched;
    if (t.index < predicted.labels.size() &&
        base_label(predicted.labels[t.index]) == base_label(t.deprel)) {
      ++las.matched;
    }
  }
  return {uas, las};
}

double EvalReport::micro(Metric m) const {
  return (m == Metric::kUuas ? uuas : m == Metric::kUas ? uas : las).ratio();
}

double EvalReport::macro(Metric m) const {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& s : sentences) {
    const Count& c = pick(s, m);
    if (c.total == 0) continue;
    sum += c.ratio();
    ++used;
  }
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

EvalReport evaluate(const Corpus& gold, const Corpus& predicted, const EvalConfig& cfg) {
  cfg.validate();
  if (gold.size() != predicted.size()) {
    throw DataError("predicted file has " + std::to_string(predicted.size()) +
                    " sentences, gold has " + std::to_string(gold.size()));
  }
  EvalReport report;
  report.config = cfg;
  std::vector<UndirectedTree> trees;
  Corpus scored;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Sentence& g = gold[i];
    const Sentence& p = predicted[i];
    if (g.id != p.id || g.words() != p.words()) {
      throw DataError("sentence " + std::to_string(i + 1) + " differs between gold (" +
                      g.id + ") and prediction (" + p.id + ")");
    }
    if (!g.has_gold || !g.usable) {
      ++report.skipped;
      continue;
    }
    for (const auto& t : p.tokens) {
      if (t.head == kNoHead) throw DataError("sentence " + p.id + ": prediction lacks heads");
    }
    SentenceScore s{g.id, {}, {}, {}};
    const UndirectedTree u = undirected_from_heads(p);
    if (cfg.uuas || cfg.relation_recall) s.uuas = uuas(u, g, cfg);
    if (cfg.uas || cfg.las) std::tie(s.uas, s.las) = uas_las(directed_from_heads(p), g, cfg);
    report.uuas += s.uuas;
    report.uas += s.uas;
    report.las += s.las;
    report.sentences.push_back(std::move(s));
    trees.push_back(u);
    scored.push_back(g);
  }
  if (cfg.relation_recall) report.relations = relation_recall(trees, scored, cfg);
  return report;
}

std::string format_score(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", ratio * 100.0);
  std::string s = buf;
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string report_tsv(const EvalReport& r) {
  std::ostringstream out;
  out << meta_line(r.meta);
  out << "metric\tscore\tmatched\ttotal\n";
  auto row = [&](Metric m, const Count& c, bool on) {
    if (on) out << metric_name(m) << '\t' << format_score(r.score(m)) << '\t' << c.matched << '\t' << c.total << '\n';
  };
  row(Metric::kUuas, r.uuas, r.config.uuas);
  row(Metric::kUas, r.uas, r.config.uas);
  row(Metric::kLas, r.las, r.config.las);
  if (r.config.relation_recall) {
    out << "\nrelation\trecall\tmatched\ttotal\n";
    for (const auto& [label, c] : r.relations) {
      out << label << '\t' << format_score(c.ratio()) << '\t' << c.matched << '\t' << c.total << '\n';
    }
  }
  out << "\nsentence\tuuas_matched\tuuas_total\tuas_matched\tlas_matched\tuas_total\n";
  for (const auto& s : r.sentences) {
    out << s.id << '\t' << s.uuas.matched << '\t' << s.uuas.total << '\t' << s.uas.matched
        << '\t' << s.las.matched << '\t' << s.uas.total << '\n';
  }
  return out.str();
}

std::string report_json(const EvalReport& r) {
  json scores = json::object();
  auto add = [&](Metric m, const Count& c, bool on) {
    if (!on) return;
    json j = count_json(c);
    j["micro"] = r.micro(m);
    j["macro"] = r.macro(m);
    j["score"] = r.score(m);
    scores[std::string(metric_name(m))] = std::move(j);
  };
  add(Metric::kUuas, r.uuas, r.config.uuas);
  add(Metric::kUas, r.uas, r.config.uas);
  add(Metric::kLas, r.las, r.config.las);
  json rel = json::object();
  for (const auto& [label, c] : r.relations) {
    json j = count_json(c);
    j["recall"] = c.ratio();
    rel[label] = std::move(j);
  }
  json sents = json::array();
  for (const auto& s : r.sentences) {
    sents.push_back({{"id", s.id},
                     {"uuas", count_json(s.uuas)},
                     {"uas", count_json(s.uas)},
                     {"las", count_json(s.las)}});
  }
  return json{{"meta", r.meta},
              {"config",
               {{"exclude_punct", r.config.exclude_punct},
                {"scheme", std::string(to_string(r.config.scheme))},
                {"aggregation", r.config.macro ? "macro" : "micro"}}},
              {"scores", std::move(scores)},
              {"relations", std::move(rel)},
              {"sentences", std::move(sents)},
              {"skipped", r.skipped}}
             .dump(2) +
         "\n";
}

const SweepCell* SweepTable::cell(int layer, std::size_t k) const {
  for (const auto& c : cells) {
    if (c.layer == layer && c.k == k) return &c;
  }
  return nullptr;
}

SweepTable sweep(const Corpus& corpus, const std::vector<int>& layers,
                 const std::vector<std::size_t>& ks, const SweepSpec& spec,
                 Provider& provider, const EvalConfig& cfg, CandidateCache* cache) {
  cfg.validate();
  SweepTable table;
  table.layers = layers;
  table.ks = ks;
  for (int layer : layers) {
    for (std::size_t k : ks) table.cells.push_back({layer, k, std::nullopt, {}});
  }

  ProviderAttentionSource source(provider, layers, spec.from_word_mode);
  std::vector<std::size_t> order = ks;
  std::sort(order.rbegin(), order.rend());
  order.erase(std::unique(order.begin(), order.end()), order.end());

  for (std::size_t k : order) {
    const std::size_t n = corpus.size();
    std::vector<SubstitutionSet> sets(n);
    std::vector<std::string> failure(n);
    parallel_for(n, spec.workers, [&](std::size_t i) {
      try {
        sets[i] = generate_substitutions(corpus[i], k, provider, spec.substitution, cache,
                                         spec.model);
      } catch (const std::exception& e) {
        failure[i] = SentenceError(corpus[i].id, e).what();
      }
    });
    for (int layer : layers) {
      AggregationSpec agg = spec.aggregation;
      agg.layer = layer;
      Corpus predicted(n);
      std::vector<std::string> errors = failure;
      parallel_for(n, spec.workers, [&](std::size_t i) {
        if (!errors[i].empty()) return;
        try {
          const Induction ind = induce(sets[i], agg, source);
          predicted[i] = predicted_sentence(corpus[i], orient(ind.tree, pseudo_root(ind.scores)));
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });
      for (auto& c : table.cells) {
        if (c.layer != layer || c.k != k) continue;
        auto bad = std::find_if(errors.begin(), errors.end(),
                                [](const std::string& e) { return !e.empty(); });
        if (bad != errors.end()) {
          c.error = *bad;
          continue;
        }
        try {
          c.report = evaluate(corpus, predicted, cfg);
        } catch (const std::exception& e) {
          c.error = e.what();
        }
      }
    }
  }
  return table;
}

std::string sweep_tsv(const SweepTable& t) {
  std::ostringstream out;
  out << meta_line(t.meta);
  out << "layer";
  const bool has_base = std::find(t.ks.begin(), t.ks.end(), 0) != t.ks.end();
  for (std::size_t k : t.ks) {
    out << "\tk=" << k;
    if (k != 0 && has_base) out << "\tdelta_k=" << k;
  }
  out << '\n';
  for (int layer : t.layers) {
    out << layer;
    const SweepCell* base = t.cell(layer, 0);
    for (std::size_t k : t.ks) {
      const SweepCell* c = t.cell(layer, k);
      const bool ok = c && c->report;
      out << '\t' << (ok ? format_score(c->report->score(t.metric)) : "ERR");
      if (k == 0 || !has_base) continue;
      if (ok && base && base->report) {
        out << '\t'
            << format_score(c->report->score(t.metric) - base->report->score(t.metric));
      } else {
        out << "\tERR";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string sweep_json(const SweepTable& t) {
  json cells = json::array();
  for (const auto& c : t.cells) {
    json j{{"layer", c.layer}, {"k", c.k}};
    if (c.report) {
      j["score"] = c.report->score(t.metric);
      j["matched"] = c.report->uuas.matched;
      j["total"] = c.report->uuas.total;
      if (const SweepCell* base = t.cell(c.layer, 0); base && base->report) {
        j["delta"] = c.report->score(t.metric) - base->report->score(t.metric);
      }
    } else {
      j["error"] = c.error;
    }
    cells.push_back(std::move(j));
  }
  return json{{"meta", t.meta},
              {"metric", std::string(metric_name(t.metric))},
              {"layers", t.layers},
              {"k_values", t.ks},
              {"cells", std::move(cells)}}
             .dump(2) +
         "\n";
}

}  // namespace dsm

#include "dsm/provider.hpp"

#include <cmath>

#include "dsm/error.hpp"
#include "json.hpp"

namespace dsm {

using nlohmann::json;

std::string_view to_string(Op op) {
  switch (op) {
    case Op::kAttention:
      return "attention";
    case Op::kMlmTopk:
      return "mlm_topk";
    case Op::kUpos:
      return "upos";
  }
  return "?";
}

Op op_from_string(std::string_view s) {
  if (s == "attention") return Op::kAttention;
  if (s == "mlm_topk") return Op::kMlmTopk;
  if (s == "upos") return Op::kUpos;
  throw ProtocolError("unknown op '" + std::string(s) + "'");
}

void validate_request(const ModelRequest& req) {
  switch (req.op) {
    case Op::kAttention:
      if (req.layers.empty()) throw ProtocolError("attention without layers");
      if (req.words.empty()) throw ProtocolError("attention on empty sentence");
      break;
    case Op::kMlmTopk:
      if (req.position >= req.words.size()) {
        throw ProtocolError("mlm_topk position out of range");
      }
      if (req.k == 0) throw ProtocolError("mlm_topk with k = 0");
      break;
    case Op::kUpos:
      break;
  }
}

void validate_response(const ModelRequest& req, const ModelResponse& resp) {
  if (resp.id != req.id) {
    throw ProtocolError("response id " + std::to_string(resp.id) +
                        " does not match request " + std::to_string(req.id));
  }
  switch (req.op) {
    case Op::kAttention: {
      const std::size_t t = resp.subword_forms.size();
      if (resp.word_ids.size() != t) {
        throw ProtocolError("word_ids and subword_forms differ in length");
      }
      for (int layer : req.layers) {
        auto it = resp.attention.find(layer);
        if (it == resp.attention.end() || it->second.empty()) {
          throw ProtocolError("missing attention for layer " +
                              std::to_string(layer));
        }
        for (std::size_t h = 0; h < it->second.size(); ++h) {
          const auto& m = it->second[h];
          if (m.size() != t) {
            throw ProtocolError("attention matrix is not T×T");
          }
          for (std::size_t i = 0; i < t; ++i) {
            double sum = 0.0;
            for (double v : m.row(i)) {
              if (!std::isfinite(v) || v < 0.0) {
                throw ProtocolError("attention entry not finite and >= 0");
              }
              sum += v;
            }
            if (std::abs(sum - 1.0) > kWireRowTolerance) {
              throw ProtocolError("attention row " + std::to_string(i) +
                                  " of layer " + std::to_string(layer) +
                                  " head " + std::to_string(h) + " sums to " +
                                  std::to_string(sum));
            }
          }
        }
      }
      break;
    }
    case Op::kMlmTopk:
      if (resp.candidates.size() > req.k) {
        throw ProtocolError("more than k candidates");
      }
      for (std::size_t i = 1; i < resp.candidates.size(); ++i) {
        if (resp.candidates[i].logprob > resp.candidates[i - 1].logprob) {
          throw ProtocolError("candidates not sorted by log-probability");
        }
      }
      break;
    case Op::kUpos:
      if (resp.upos.size() != req.words.size()) {
        throw ProtocolError("upos length differs from word count");
      }
      break;
  }
}

std::string encode_request(const ModelRequest& req) {
  json j;
  j["id"] = req.id;
  j["op"] = to_string(req.op);
  j["words"] = req.words;
  if (req.op == Op::kAttention) j["layers"] = req.layers;
  if (req.op == Op::kMlmTopk) {
    j["position"] = req.position;
    j["k"] = req.k;
  }
  return j.dump();
}

ModelRequest decode_request(std::string_view line) {
  try {
    const json j = json::parse(line);
    ModelRequest req;
    req.id = j.at("id").get<std::uint64_t>();
    req.op = op_from_string(j.at("op").get<std::string>());
    req.words = j.at("words").get<std::vector<std::string>>();
    if (req.op == Op::kAttention) req.layers = j.at("layers").get<std::vector<int>>();
    if (req.op == Op::kMlmTopk) {
      req.position = j.at("position").get<std::size_t>();
      req.k = j.at("k").get<std::size_t>();
    }
    return req;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  }
}

std::string encode_response(const ModelResponse& resp) {
  json j;
  j["id"] = resp.id;
  if (!resp.subword_forms.empty() || !resp.attention.empty()) {
    j["subword_forms"] = resp.subword_forms;
    json ids = json::array();
    for (const auto& w : resp.word_ids) {
      ids.push_back(w ? json(*w) : json(nullptr));
    }
    j["word_ids"] = std::move(ids);
    json att = json::object();
    for (const auto& [layer, heads] : resp.attention) {
      json hs = json::array();
      for (const auto& m : heads) {
        json rows = json::array();
        for (std::size_t i = 0; i < m.size(); ++i) {
          rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
        }
        hs.push_back(std::move(rows));
      }
      att[std::to_string(layer)] = std::move(hs);
    }
    j["attention"] = std::move(att);
  }
  if (!resp.candidates.empty()) {
    json cs = json::array();
    for (const auto& c : resp.candidates) {
      cs.push_back({{"word", c.word}, {"logprob", c.logprob}});
    }
    j["candidates"] = std::move(cs);
  }
  if (!resp.upos.empty()) j["upos"] = resp.upos;
  return j.dump();
}

ModelResponse decode_response(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  if (j.contains("error")) {
    throw BackendError(j["error"].is_string() ? j["error"].get<std::string>()
                                              : j["error"].dump());
  }
  try {
    ModelResponse resp;
    resp.id = j.at("id").get<std::uint64_t>();
    if (j.contains("subword_forms")) {
      resp.subword_forms = j["subword_forms"].get<std::vector<std::string>>();
      for (const auto& w : j.at("word_ids")) {
        resp.word_ids.push_back(w.is_null() ? std::nullopt
                                            : std::optional<int>(w.get<int>()));
      }
      for (const auto& [key, heads] : j.at("attention").items()) {
        std::vector<SquareMatrix> mats;
        for (const auto& rows : heads) {
          const std::size_t t = rows.size();
          SquareMatrix m(t);
          for (std::size_t i = 0; i < t; ++i) {
            const auto& row = rows[i];
            if (row.size() != t) throw ProtocolError("ragged attention matrix");
            for (std::size_t c = 0; c < t; ++c) {
              if (!row[c].is_number()) {
                throw ProtocolError("non-numeric attention entry");
              }
              m(i, c) = row[c].get<double>();
            }
          }
          mats.push_back(std::move(m));
        }
        resp.attention.emplace(std::stoi(key), std::move(mats));
      }
    }
    if (j.contains("candidates")) {
      for (const auto& c : j["candidates"]) {
        resp.candidates.push_back(
            {c.at("word").get<std::string>(), c.at("logprob").get<double>()});
      }
    }
    if (j.contains("upos")) resp.upos = j["upos"].get<std::vector<std::string>>();
    return resp;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ProtocolError("attention layer key is not an integer");
  }
}

std::string encode_error(std::uint64_t id, std::string_view message) {
  return json{{"id", id}, {"error", message}}.dump();
}

std::string encode_handshake(const Handshake& hs) {
  return json{{"model", hs.model}, {"layers", hs.layers}, {"heads", hs.heads}}
      .dump();
}

Handshake decode_handshake(std::string_view line) {
  try {
    const json j = json::parse(line);
    if (j.contains("error")) throw BackendError(j["error"].dump());
    return {j.at("model").get<std::string>(), j.at("layers").get<int>(),
            j.at("heads").get<int>()};
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed handshake: ") + e.what());
  }
}

ModelResponse Provider::attention(const std::vector<std::string>& words,
                                  const std::vector<int>& layers) {
  ModelRequest req;
  req.id = next_id();
  req.op = Op::kAttention;
  req.words = words;
  req.layers = layers;
  return request(req);
}

std::vector<Candidate> Provider::mlm_topk(const std::vector<std::string>& words,
                                          std::size_t position, std::size_t k) {
  ModelRequest req;
  req.id = next_id();
  req.op = Op::kMlmTopk;
  req.words = words;
  req.position = position;
  req.k = k;
  return request(req).candidates;
}

std::vector<std::string> Provider::upos(const std::vector<std::string>& words) {
  ModelRequest req;
  req.id = next_id();
  req.op = Op::kUpos;
  req.words = words;
  return request(req).upos;
}

}  // namespace dsm

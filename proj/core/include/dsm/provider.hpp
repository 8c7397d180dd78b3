#pragma once

// Wire protocol for model-dependent queries. Messages are single-line JSON
// objects exchanged with a sidecar over stdio; the fixture backend answers
// the same requests in-process.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsm/matrix.hpp"

namespace dsm {

enum class Op { kAttention, kMlmTopk, kUpos };

std::string_view to_string(Op op);
Op op_from_string(std::string_view s);

struct ModelRequest {
  std::uint64_t id = 0;
  Op op = Op::kAttention;
  std::vector<std::string> words;
  std::vector<int> layers;     // attention only
  std::size_t position = 0;    // mlm_topk only
  std::size_t k = 0;           // mlm_topk only

  bool operator==(const ModelRequest&) const = default;
};

struct Candidate {
  std::string word;
  double logprob = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct ModelResponse {
  std::uint64_t id = 0;
  // attention
  std::vector<std::string> subword_forms;
  std::vector<std::optional<int>> word_ids;  // nullopt for special tokens
  std::map<int, std::vector<SquareMatrix>> attention;  // layer -> heads, T×T
  // mlm_topk
  std::vector<Candidate> candidates;
  // upos
  std::vector<std::string> upos;

  bool operator==(const ModelResponse&) const = default;
};

struct Handshake {
  std::string model;
  int layers = 0;
  int heads = 0;

  bool operator==(const Handshake&) const = default;
};

inline constexpr double kWireRowTolerance = 1e-4;

// Checks the request preconditions (position < |words|, non-empty layers).
// Throws ProtocolError.
void validate_request(const ModelRequest& req);

// Checks a response against the request it answers: id, payload shape, row
// stochasticity within kWireRowTolerance, candidate count. Throws
// ProtocolError.
void validate_response(const ModelRequest& req, const ModelResponse& resp);

// JSON-lines codec. Each function produces or consumes exactly one line
// (without the trailing newline).
std::string encode_request(const ModelRequest& req);
ModelRequest decode_request(std::string_view line);
std::string encode_response(const ModelResponse& resp);
ModelResponse decode_response(std::string_view line);
std::string encode_error(std::uint64_t id, std::string_view message);
std::string encode_handshake(const Handshake& hs);
Handshake decode_handshake(std::string_view line);

// Abstract backend. Implementations must be safe to call from several
// threads at once.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual Handshake hello() = 0;
  virtual ModelResponse request(const ModelRequest& req) = 0;

  std::uint64_t next_id() { return ++last_id_; }

  ModelResponse attention(const std::vector<std::string>& words,
                          const std::vector<int>& layers);
  std::vector<Candidate> mlm_topk(const std::vector<std::string>& words,
                                  std::size_t position, std::size_t k);
  std::vector<std::string> upos(const std::vector<std::string>& words);

 private:
  std::atomic<std::uint64_t> last_id_{0};
};

}  // namespace dsm

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dsm {

// Failure classes. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  kInternal,
  kParse,
  kData,
  kProvider,
  kArchive,
  kConfig,
  kMissingArtifact,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorKind kind = ErrorKind::kInternal)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what, ErrorKind::kParse),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Shape or alignment violations between inputs that should agree.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ErrorKind::kData) {}
};

class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what)
      : Error(what, ErrorKind::kProvider) {}
};

// The sidecar process is gone or the pipe broke.
class TransportError : public ProviderError {
 public:
  explicit TransportError(const std::string& what)
      : ProviderError("transport: " + what) {}
};

// The backend answered with an error payload.
class BackendError : public ProviderError {
 public:
  explicit BackendError(const std::string& what)
      : ProviderError("backend: " + what) {}
};

class TimeoutError : public ProviderError {
 public:
  explicit TimeoutError(const std::string& what)
      : ProviderError("timeout: " + what) {}
};

// A response that violates the wire contract (shape, ids, stochasticity).
class ProtocolError : public ProviderError {
 public:
  explicit ProtocolError(const std::string& what)
      : ProviderError("protocol: " + what) {}
};

class ArchiveError : public Error {
 public:
  explicit ArchiveError(const std::string& what)
      : Error(what, ErrorKind::kArchive) {}
};

class ChecksumError : public ArchiveError {
 public:
  explicit ChecksumError(std::size_t record)
      : ArchiveError("checksum mismatch in record " + std::to_string(record)),
        record_(record) {}
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(what, ErrorKind::kConfig) {}
};

class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& path, const std::string& producer)
      : Error("missing " + path + " (produce it with `dsm " + producer + "`)",
              ErrorKind::kMissingArtifact) {}
};

// Wraps a failure with the id of the sentence being processed, keeping the
// original failure class.
class SentenceError : public Error {
 public:
  SentenceError(const std::string& sentence_id, const Error& cause)
      : Error("sentence " + sentence_id + ": " + cause.what(), cause.kind()) {}
  SentenceError(const std::string& sentence_id, const std::exception& cause)
      : Error("sentence " + sentence_id + ": " + cause.what()) {}
};

}  // namespace dsm

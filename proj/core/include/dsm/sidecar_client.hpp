#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <future>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "dsm/provider.hpp"

namespace dsm {

// Talks to a model sidecar over its stdin/stdout, one JSON object per line.
// Writes are serialized; a reader thread routes responses to waiting callers
// by id, so several workers can share one client.
class SidecarClient : public Provider {
 public:
  // `command` runs under /bin/sh -c. The handshake is performed before the
  // constructor returns.
  explicit SidecarClient(const std::string& command,
                         std::chrono::milliseconds timeout =
                             std::chrono::seconds(120));
  ~SidecarClient() override;

  SidecarClient(const SidecarClient&) = delete;
  SidecarClient& operator=(const SidecarClient&) = delete;

  Handshake hello() override { return handshake_; }
  ModelResponse request(const ModelRequest& req) override;

 private:
  void start(const std::string& command);
  void write_line(const std::string& line);
  bool read_line(std::string& line, int timeout_ms);
  void reader_loop();
  void fail_pending(const std::string& why);
  void shutdown();

  std::chrono::milliseconds timeout_;
  Handshake handshake_;

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string read_buffer_;

  std::mutex write_mu_;
  std::mutex pending_mu_;
  std::map<std::uint64_t, std::promise<std::string>> pending_;
  bool closed_ = false;
  std::string closed_reason_;
  std::thread reader_;
};

}  // namespace dsm

#include "dsm/sidecar_client.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "dsm/error.hpp"
#include "json.hpp"

namespace dsm {

namespace {

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

}  // namespace

SidecarClient::SidecarClient(const std::string& command,
                             std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  start(command);
  try {
    write_line(R"({"op":"hello"})");
    std::string line;
    if (!read_line(line, static_cast<int>(timeout_.count()))) {
      throw TransportError("sidecar exited before the handshake");
    }
    handshake_ = decode_handshake(line);
  } catch (...) {
    shutdown();
    throw;
  }
  reader_ = std::thread([this] { reader_loop(); });
}

SidecarClient::~SidecarClient() { shutdown(); }

void SidecarClient::start(const std::string& command) {
  int in_pair[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) {
    throw TransportError(errno_text("socketpair"));
  }
  int out_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pair[0]);
    ::close(in_pair[1]);
    throw TransportError(errno_text("pipe"));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pair[0], in_pair[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw TransportError(errno_text("fork"));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in_pair[1], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(in_pair[1]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pair[0];
  from_child_ = out_pipe[0];
}

void SidecarClient::write_line(const std::string& line) {
  std::lock_guard lock(write_mu_);
  if (to_child_ < 0) throw TransportError("sidecar input already closed");
  std::string data = line + '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n =
        ::send(to_child_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("write to sidecar"));
    }
    off += static_cast<std::size_t>(n);
  }
}

bool SidecarClient::read_line(std::string& line, int timeout_ms) {
  while (true) {
    const auto nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      return true;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("poll"));
    }
    if (ready == 0) throw TimeoutError("no reply from sidecar");
    char buf[65536];
    const ssize_t n = ::read(from_child_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("read from sidecar"));
    }
    if (n == 0) return false;
    read_buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

void SidecarClient::reader_loop() {
  std::string line;
  std::string reason = "sidecar closed its output";
  try {
    while (read_line(line, -1)) {
      std::uint64_t id = 0;
      try {
        const auto j = nlohmann::json::parse(line);
        if (!j.contains("id") || !j["id"].is_number_unsigned()) continue;
        id = j["id"].get<std::uint64_t>();
      } catch (const nlohmann::json::exception&) {
        continue;  // not a protocol line
      }
      std::lock_guard lock(pending_mu_);
      auto it = pending_.find(id);
      if (it == pending_.end()) continue;  // caller already timed out
      it->second.set_value(std::move(line));
      pending_.erase(it);
    }
  } catch (const std::exception& e) {
    reason = e.what();
  }
  fail_pending(reason);
}

void SidecarClient::fail_pending(const std::string& why) {
  std::lock_guard lock(pending_mu_);
  closed_ = true;
  closed_reason_ = why;
  for (auto& [id, promise] : pending_) {
    promise.set_exception(std::make_exception_ptr(TransportError(why)));
  }
  pending_.clear();
}

ModelResponse SidecarClient::request(const ModelRequest& req) {
  validate_request(req);
  std::future<std::string> reply;
  {
    std::lock_guard lock(pending_mu_);
    if (closed_) throw TransportError(closed_reason_);
    auto [it, inserted] = pending_.try_emplace(req.id);
    if (!inserted) {
      throw ProtocolError("request id " + std::to_string(req.id) +
                          " already in flight");
    }
    reply = it->second.get_future();
  }
  try {
    write_line(encode_request(req));
  } catch (...) {
    std::lock_guard lock(pending_mu_);
    pending_.erase(req.id);
    throw;
  }
  if (reply.wait_for(timeout_) != std::future_status::ready) {
    std::lock_guard lock(pending_mu_);
    pending_.erase(req.id);
    throw TimeoutError("request " + std::to_string(req.id) + " (" +
                       std::string(to_string(req.op)) + ") exceeded " +
                       std::to_string(timeout_.count()) + " ms");
  }
  ModelResponse resp = decode_response(reply.get());
  validate_response(req, resp);
  return resp;
}

void SidecarClient::shutdown() {
  {
    std::lock_guard lock(write_mu_);
    if (to_child_ >= 0) {
      ::close(to_child_);
      to_child_ = -1;
    }
  }
  if (pid_ > 0) {
    bool exited = false;
    for (int i = 0; i < 100 && !exited; ++i) {
      int status = 0;
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_ || r < 0) {
        exited = true;
      } else {
        ::usleep(10'000);
      }
    }
    // Also reaps anything the shell left behind in the process group.
    ::kill(-pid_, SIGKILL);
    if (!exited) ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
  if (reader_.joinable()) reader_.join();
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
}

}  // namespace dsm

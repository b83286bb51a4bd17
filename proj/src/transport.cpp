// Keep above httplib.h: its <resolv.h> defines a `_res` macro that clashes with Eigen.
#include "hsicx/error.hpp"
#include "hsicx/model.hpp"
#include "hsicx/protocol.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include <httplib.h>

extern char** environ;

namespace hsicx {

namespace {

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left > 0 ? static_cast<int>(left) : 0;
}

// One child process speaking the NDJSON protocol on stdin/stdout.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0) throw EndpointFailure("pipe: " + std::string(std::strerror(errno)));
    if (pipe2(from_child, O_CLOEXEC) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw EndpointFailure("pipe: " + std::string(std::strerror(errno)));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    const int rc = posix_spawn(&pid_, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(to_child[0]);
    close(from_child[1]);
    if (rc != 0) {
      close(to_child[1]);
      close(from_child[0]);
      throw EndpointFailure("cannot start model command: " + std::string(std::strerror(rc)));
    }
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    close(in_fd_);
    close(out_fd_);
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, nullptr, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }

  std::string roundtrip(const std::string& line, Clock::time_point deadline) {
    write_all(line + '\n', deadline);
    return read_line(deadline);
  }

 private:
  void write_all(const std::string& data, Clock::time_point deadline) {
    std::size_t done = 0;
    while (done < data.size()) {
      pollfd pfd{in_fd_, POLLOUT, 0};
      const int ready = poll(&pfd, 1, remaining_ms(deadline));
      if (ready == 0) throw EndpointFailure("timeout writing request");
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw EndpointFailure("poll: " + std::string(std::strerror(errno)));
      }
      const ssize_t n = write(in_fd_, data.data() + done, data.size() - done);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw EndpointFailure("model process closed its input: " + std::string(std::strerror(errno)));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    while (true) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      pollfd pfd{out_fd_, POLLIN, 0};
      const int ready = poll(&pfd, 1, remaining_ms(deadline));
      if (ready == 0) throw EndpointFailure("timeout waiting for model response");
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw EndpointFailure("poll: " + std::string(std::strerror(errno)));
      }
      char chunk[65536];
      const ssize_t n = read(out_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw EndpointFailure("read: " + std::string(std::strerror(errno)));
      }
      if (n == 0) throw EndpointFailure("model process exited before responding");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
};

class SubprocessEndpoint final : public Endpoint {
 public:
  SubprocessEndpoint(std::string command, std::chrono::milliseconds timeout, std::size_t workers)
      : command_(std::move(command)), timeout_(timeout), children_(workers) {
    static std::once_flag ignore_sigpipe;
    std::call_once(ignore_sigpipe, [] { std::signal(SIGPIPE, SIG_IGN); });
  }

  std::string describe() const override { return "cmd:" + command_; }
  std::size_t max_concurrency() const override { return children_.size(); }

  Outputs evaluate_chunk(const InputBatch& chunk, std::size_t worker) override {
    auto& child = children_.at(worker);
    if (!child) child = std::make_unique<ChildProcess>(command_);
    const auto id = next_id_.fetch_add(1);
    const auto request = encode_request(id, chunk);
    try {
      const auto line = child->roundtrip(request, Clock::now() + timeout_);
      return decode_response(line, id, chunk.rows.size());
    } catch (...) {
      // the stream is out of sync after any failure; start a fresh child next time
      child.reset();
      throw;
    }
  }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  std::vector<std::unique_ptr<ChildProcess>> children_;
  std::atomic<std::uint64_t> next_id_{0};
};

struct HttpTarget {
  std::string host;
  int port = 80;
  std::string path = "/";
};

HttpTarget parse_http_url(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw InvalidArgument("model URL must start with http://");
  const auto rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  const auto authority = rest.substr(0, slash);
  HttpTarget target;
  if (slash != std::string::npos) target.path = rest.substr(slash);
  const auto colon = authority.rfind(':');
  target.host = authority.substr(0, colon);
  if (colon != std::string::npos) {
    const auto port_text = authority.substr(colon + 1);
    try {
      std::size_t used = 0;
      target.port = std::stoi(port_text, &used);
      if (used != port_text.size() || target.port <= 0 || target.port > 65535) throw std::out_of_range("port");
    } catch (const std::exception&) {
      throw InvalidArgument("bad port in model URL '" + url + "'");
    }
  }
  if (target.host.empty()) throw InvalidArgument("model URL has no host: '" + url + "'");
  return target;
}

class HttpEndpoint final : public Endpoint {
 public:
  HttpEndpoint(std::string url, std::chrono::milliseconds timeout, std::size_t workers)
      : url_(std::move(url)), target_(parse_http_url(url_)), timeout_(timeout), clients_(workers) {}

  std::string describe() const override { return url_; }
  std::size_t max_concurrency() const override { return clients_.size(); }

  Outputs evaluate_chunk(const InputBatch& chunk, std::size_t worker) override {
    auto& client = clients_.at(worker);
    if (!client) {
      client = std::make_unique<httplib::Client>(target_.host, target_.port);
      const auto secs = static_cast<time_t>(timeout_.count() / 1000);
      const auto usecs = static_cast<time_t>((timeout_.count() % 1000) * 1000);
      client->set_connection_timeout(secs, usecs);
      client->set_read_timeout(secs, usecs);
      client->set_write_timeout(secs, usecs);
      client->set_keep_alive(true);
      client->set_tcp_nodelay(true);
    }
    const auto id = next_id_.fetch_add(1);
    const auto started = Clock::now();
    auto res = client->Post(target_.path, encode_request(id, chunk), "application/json");
    if (!res) {
      const auto error = res.error();
      client.reset();
      if (Clock::now() - started >= timeout_) {
        throw EndpointFailure("timeout after " + std::to_string(timeout_.count()) + " ms");
      }
      throw EndpointFailure("HTTP request failed: " + httplib::to_string(error));
    }
    if (res->status != 200) throw EndpointFailure("HTTP status " + std::to_string(res->status));
    std::string_view body = res->body;
    if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    return decode_response(body, id, chunk.rows.size());
  }

 private:
  std::string url_;
  HttpTarget target_;
  std::chrono::milliseconds timeout_;
  std::vector<std::unique_ptr<httplib::Client>> clients_;
  std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace

std::unique_ptr<Endpoint> make_subprocess_endpoint(std::string command, std::chrono::milliseconds timeout,
                                                   std::size_t workers) {
  if (workers == 0) throw InvalidArgument("endpoint needs at least one worker");
  return std::make_unique<SubprocessEndpoint>(std::move(command), timeout, workers);
}

std::unique_ptr<Endpoint> make_http_endpoint(std::string url, std::chrono::milliseconds timeout,
                                             std::size_t workers) {
  if (workers == 0) throw InvalidArgument("endpoint needs at least one worker");
  return std::make_unique<HttpEndpoint>(std::move(url), timeout, workers);
}

}  // namespace hsicx

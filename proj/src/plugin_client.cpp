#include "selfage/plugin_client.hpp"

#include <csignal>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <unordered_map>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "selfage/error.hpp"

namespace selfage {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

// The plug-in went away (EOF or EPIPE); eligible for a restart.
struct PluginCrashed {
  std::string what;
};

struct PluginTimedOut {};

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

}  // namespace

ExternalClassifierClient::ExternalClassifierClient(PluginOptions options)
    : options_(std::move(options)) {
  ignore_sigpipe();
  start();
}

ExternalClassifierClient::~ExternalClassifierClient() { stop(); }

void ExternalClassifierClient::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw PluginError(std::string("pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw PluginError(std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) throw PluginError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    // Own process group, so a shell wrapper and its children die together.
    setpgid(0, 0);
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", options_.command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  set_nonblocking(to_child_);
  set_nonblocking(from_child_);
  pending_.clear();
  response_line_ = 0;

  const std::string hello = json{{"protocol", kPluginProtocol}}.dump() + "\n";
  const auto deadline = Clock::now() + options_.timeout;
  std::size_t written = 0;
  std::string line;
  try {
    while (written < hello.size()) {
      pollfd pfd{to_child_, POLLOUT, 0};
      if (poll(&pfd, 1, remaining_ms(deadline)) <= 0) throw PluginTimedOut{};
      const ssize_t n = write(to_child_, hello.data() + written, hello.size() - written);
      if (n < 0 && errno != EAGAIN) throw PluginCrashed{"plug-in closed its input"};
      if (n > 0) written += static_cast<std::size_t>(n);
    }
    if (!read_line(line, deadline)) throw PluginCrashed{"plug-in exited during handshake"};
  } catch (const PluginCrashed& e) {
    stop();
    throw PluginError("plug-in '" + options_.command + "': " + e.what);
  } catch (const PluginTimedOut&) {
    stop();
    throw PluginError("plug-in '" + options_.command + "': handshake timed out");
  }
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error&) {
    stop();
    throw ProtocolError("response line 1: handshake reply is not JSON");
  }
  if (!reply.is_object() || reply.value("ok", false) != true) {
    stop();
    throw ProtocolError("response line 1: plug-in refused handshake: " + line);
  }
  name_ = reply.contains("name") && reply["name"].is_string() ? reply["name"].get<std::string>()
                                                               : options_.command;
}

void ExternalClassifierClient::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // Give a well-behaved plug-in a moment to exit on EOF, then kill it.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        kill(-pid_, SIGKILL);
        pid_ = -1;
        return;
      }
      usleep(2000);
    }
    kill(-pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

bool ExternalClassifierClient::read_line(std::string& line, Clock::time_point deadline) {
  while (true) {
    const std::size_t newline = pending_.find('\n');
    if (newline != std::string::npos) {
      line = pending_.substr(0, newline);
      pending_.erase(0, newline + 1);
      ++response_line_;
      return true;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, remaining_ms(deadline));
    if (ready == 0) throw PluginTimedOut{};
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw PluginCrashed{std::strerror(errno)};
    }
    char buf[65536];
    const ssize_t n = read(from_child_, buf, sizeof buf);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EAGAIN || errno == EINTR) continue;
      throw PluginCrashed{std::strerror(errno)};
    }
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

std::vector<Prediction> ExternalClassifierClient::exchange(std::span<const Post> posts) {
  std::unordered_map<std::string, std::size_t> slot;
  slot.reserve(posts.size());
  std::string requests;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (!slot.emplace(posts[i].id, i).second) {
      throw ValidationError("duplicate post id '" + posts[i].id + "' in one batch");
    }
    requests += json{{"id", posts[i].id}, {"text", posts[i].text}}.dump(
        -1, ' ', false, json::error_handler_t::replace);
    requests += '\n';
  }

  std::vector<Prediction> out(posts.size());
  std::vector<bool> filled(posts.size(), false);
  std::size_t received = 0;
  std::size_t written = 0;
  const auto deadline = Clock::now() + options_.timeout;

  const auto consume = [&](const std::string& line) {
    const std::string where = "response line " + std::to_string(response_line_) + ": ";
    json reply;
    try {
      reply = json::parse(line);
    } catch (const json::parse_error&) {
      throw ProtocolError(where + "not valid JSON");
    }
    if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_string()) {
      throw ProtocolError(where + "missing string field 'id'");
    }
    const auto id = reply["id"].get<std::string>();
    const auto it = slot.find(id);
    if (it == slot.end()) throw ProtocolError(where + "unknown id '" + id + "'");
    if (filled[it->second]) throw ProtocolError(where + "duplicate response for id '" + id + "'");
    if (!reply.contains("label") || !reply["label"].is_string()) {
      throw ProtocolError(where + "missing string field 'label'");
    }
    Label label;
    try {
      label = parse_label(reply["label"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ProtocolError(where + e.what());
    }
    if (!reply.contains("score") || !reply["score"].is_number()) {
      throw ProtocolError(where + "missing numeric field 'score'");
    }
    out[it->second] = {id, label, reply["score"].get<double>()};
    filled[it->second] = true;
    ++received;
  };

  // Write and read concurrently so neither side blocks on a full pipe.
  while (received < posts.size()) {
    std::string line;
    const std::size_t newline = pending_.find('\n');
    if (newline != std::string::npos) {
      line = pending_.substr(0, newline);
      pending_.erase(0, newline + 1);
      ++response_line_;
      consume(line);
      continue;
    }
    pollfd fds[2] = {{from_child_, POLLIN, 0}, {to_child_, POLLOUT, 0}};
    const nfds_t count = written < requests.size() ? 2 : 1;
    const int ready = poll(fds, count, remaining_ms(deadline));
    if (ready == 0) throw PluginTimedOut{};
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw PluginCrashed{std::strerror(errno)};
    }
    if (count == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = write(to_child_, requests.data() + written, requests.size() - written);
      if (n < 0 && errno != EAGAIN && errno != EINTR) {
        throw PluginCrashed{"plug-in closed its input"};
      }
      if (n > 0) written += static_cast<std::size_t>(n);
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[65536];
      const ssize_t n = read(from_child_, buf, sizeof buf);
      if (n == 0) throw PluginCrashed{"plug-in exited mid-batch"};
      if (n < 0 && errno != EAGAIN && errno != EINTR) throw PluginCrashed{std::strerror(errno)};
      if (n > 0) pending_.append(buf, static_cast<std::size_t>(n));
    }
  }
  return out;
}

std::vector<Prediction> ExternalClassifierClient::classify(std::span<const Post> posts) {
  if (posts.empty()) return {};
  for (int attempt = 0;; ++attempt) {
    try {
      if (pid_ < 0) start();
      return exchange(posts);
    } catch (const PluginCrashed& e) {
      stop();
      if (attempt >= options_.retries) {
        throw PluginError("plug-in '" + options_.command + "' failed after " +
                          std::to_string(attempt + 1) + " attempt(s): " + e.what);
      }
      ++restarts_;
    } catch (const PluginTimedOut&) {
      stop();
      throw PluginError("plug-in '" + options_.command + "' timed out after " +
                        std::to_string(options_.timeout.count()) + " ms");
    } catch (const ProtocolError&) {
      stop();
      throw;
    }
  }
}

std::vector<Prediction> classify_external(ExternalClassifierClient& client,
                                          std::span<const Post> posts) {
  return client.classify(posts);
}

}  // namespace selfage

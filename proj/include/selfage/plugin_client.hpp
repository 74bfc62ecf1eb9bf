#pragma once

#include <chrono>
#include <span>
#include <string>
#include <vector>

#include "selfage/classify.hpp"

namespace selfage {

inline constexpr std::string_view kPluginProtocol = "age-clf/1";

struct PluginOptions {
  // Run through /bin/sh -c.
  std::string command;
  std::chrono::milliseconds timeout{30000};
  // Restarts after a crash before giving up.
  int retries = 2;
};

// Talks age-clf/1 to a plug-in process over its stdin/stdout: one JSON object
// per line, UTF-8, newline terminated.
//   -> {"protocol":"age-clf/1"}           <- {"ok":true,"name":...}
//   -> {"id":...,"text":...}              <- {"id":...,"label":"age"|"no_age","score":...}
// Responses may arrive in any order; they are matched to requests by id.
// One client owns one process and is not thread-safe. SIGPIPE is ignored
// process-wide once a client is constructed.
class ExternalClassifierClient final : public Classifier {
 public:
  // Starts the process and completes the handshake; throws PluginError or ProtocolError.
  explicit ExternalClassifierClient(PluginOptions options);
  ~ExternalClassifierClient() override;
  ExternalClassifierClient(const ExternalClassifierClient&) = delete;
  ExternalClassifierClient& operator=(const ExternalClassifierClient&) = delete;

  // Throws ProtocolError on malformed, unknown or duplicate responses (naming
  // the response line), PluginError on timeout or once retries are exhausted.
  std::vector<Prediction> classify(std::span<const Post> posts) override;
  std::string name() const override { return name_; }
  int restarts() const { return restarts_; }

 private:
  void start();
  void stop();
  std::vector<Prediction> exchange(std::span<const Post> posts);
  bool read_line(std::string& line, std::chrono::steady_clock::time_point deadline);

  PluginOptions options_;
  std::string name_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
  std::size_t response_line_ = 0;
  int restarts_ = 0;
};

std::vector<Prediction> classify_external(ExternalClassifierClient& client,
                                          std::span<const Post> posts);

}  // namespace selfage

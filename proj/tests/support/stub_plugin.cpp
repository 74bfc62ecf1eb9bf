// Test double for the age-clf/1 plug-in protocol. Behaviour is picked with
// --mode; see usage() below.

#include <poll.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace {

using json = nlohmann::json;

void usage() {
  std::cerr << "usage: stub_plugin --mode MODE [--keyword K] [--marker PATH]\n"
               "modes: age no_age keyword reverse unknown_id duplicate garbage\n"
               "       crash crash_once hang bad_handshake\n";
}

class LineReader {
 public:
  // Returns false on EOF. timeout_ms < 0 blocks; 0 lines within the timeout
  // sets timed_out.
  bool next(std::string& line, int timeout_ms, bool& timed_out) {
    timed_out = false;
    while (true) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return true;
      }
      pollfd pfd{0, POLLIN, 0};
      const int ready = poll(&pfd, 1, timeout_ms);
      if (ready == 0) {
        timed_out = true;
        return true;
      }
      char tmp[4096];
      const ssize_t n = read(0, tmp, sizeof tmp);
      if (n <= 0) return false;
      buf_.append(tmp, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string buf_;
};

void emit(const json& j) {
  std::cout << j.dump() << '\n' << std::flush;
}

json answer(const json& request, bool age) {
  return {{"id", request.at("id")}, {"label", age ? "age" : "no_age"}, {"score", age ? 1.0 : -1.0}};
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode;
  std::string keyword;
  std::string marker;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--mode") mode = argv[i + 1];
    else if (flag == "--keyword") keyword = argv[i + 1];
    else if (flag == "--marker") marker = argv[i + 1];
  }
  if (mode.empty()) {
    usage();
    return 2;
  }
  if (mode == "crash_once") {
    if (!std::filesystem::exists(marker)) {
      std::ofstream(marker) << "crashed\n";
      mode = "crash";
    } else {
      mode = "age";
    }
  }

  LineReader in;
  std::string line;
  bool timed_out = false;
  if (!in.next(line, -1, timed_out)) return 1;
  const json hello = json::parse(line, nullptr, false);
  if (mode == "bad_handshake" || hello.is_discarded() || hello.value("protocol", "") != "age-clf/1") {
    emit({{"ok", false}});
    return 1;
  }
  emit({{"ok", true}, {"name", "stub-" + mode}});

  std::vector<json> held;
  bool first = true;
  while (true) {
    const int wait = (mode == "reverse" && !held.empty()) ? 50 : -1;
    if (!in.next(line, wait, timed_out)) break;
    if (timed_out) {
      for (auto it = held.rbegin(); it != held.rend(); ++it) emit(answer(*it, true));
      held.clear();
      continue;
    }
    const json request = json::parse(line);
    if (mode == "crash") return 3;
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
      return 0;
    }
    if (mode == "garbage" && first) {
      std::cout << "this is not json\n" << std::flush;
    } else if (mode == "unknown_id" && first) {
      emit({{"id", "no-such-id"}, {"label", "age"}, {"score", 1.0}});
    } else if (mode == "duplicate" && first) {
      emit(answer(request, true));
      emit(answer(request, true));
    } else if (mode == "reverse") {
      held.push_back(request);
    } else if (mode == "keyword") {
      emit(answer(request, request.at("text").get<std::string>().find(keyword) != std::string::npos));
    } else {
      emit(answer(request, mode != "no_age"));
    }
    first = false;
  }
  for (auto it = held.rbegin(); it != held.rend(); ++it) emit(answer(*it, true));
  return 0;
}

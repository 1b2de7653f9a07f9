#pragma once

// Client for an out-of-process masked-LM worker speaking newline-delimited
// JSON over its stdin/stdout.
//
//   {"op":"hello"}                         -> {"ok":true,"max_input_tokens":n,
//                                              "special_overhead":n,"mask_token":s}
//   {"op":"tokenize","text":s}             -> {"tokens":[s...]}
//   {"op":"detokenize","tokens":[s...]}    -> {"text":s}
//   {"op":"score","tokens":[...],"mask_index":n,"label_words":[...]}
//                                          -> {"logits":[x...]}
//   {"op":"train","examples":[{"tokens","mask_index","gold"}...],
//    "label_words":[...],"lr":x,"batch_size":n,"epochs":n,"seed":n}
//                                          -> {"loss":x}
//   {"op":"reset"}                         -> {"ok":true}
//   any failure                            -> {"error":code,"message":s}
//
// `score` and `train` examples also carry "template_span":[begin,end]; workers
// are free to ignore it.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "koti/error.hpp"
#include "koti/scorer.hpp"

namespace koti {

/// A child process running `/bin/sh -c <command>` whose stdin and stdout are
/// one end of a socket pair. Closing the socket and reaping the child happen
/// on destruction.
class WorkerProcess {
 public:
  explicit WorkerProcess(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
      throw WorkerProtocolError(std::string("socketpair: ") + std::strerror(errno));
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw WorkerProtocolError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  ~WorkerProcess() {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ <= 0) return;
    using namespace std::chrono_literals;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
      std::this_thread::sleep_for(10ms);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

  void write_line(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::send(fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw WorkerProtocolError(std::string("worker write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  /// Reads one reply line. A positive `timeout` bounds the wait for data.
  std::string read_line(std::chrono::milliseconds timeout = std::chrono::milliseconds{0}) {
    for (;;) {
      if (auto nl = pending_.find('\n'); nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return line;
      }
      if (timeout.count() > 0) {
        pollfd pfd{fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        if (ready < 0 && errno == EINTR) continue;
        if (ready == 0) throw WorkerProtocolError("worker reply timed out");
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw WorkerProtocolError(std::string("worker read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw WorkerProtocolError("worker closed the connection");
      pending_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string pending_;
};

class WorkerScorer : public Scorer {
 public:
  /// Launches `command` and performs the hello handshake. A positive
  /// `reply_timeout` turns a stalled worker into a WorkerProtocolError.
  explicit WorkerScorer(std::string command,
                        std::chrono::milliseconds reply_timeout = std::chrono::milliseconds{0})
      : command_(std::move(command)), timeout_(reply_timeout), process_(command_) {
    const auto reply = request({{"op", "hello"}});
    if (!reply.contains("ok") || !reply["ok"].is_boolean() || !reply["ok"].get<bool>())
      throw WorkerProtocolError("hello: worker did not acknowledge");
    info_.max_input_tokens = get_count(reply, "max_input_tokens", "hello");
    info_.special_overhead = get_count(reply, "special_overhead", "hello");
    if (!reply.contains("mask_token") || !reply["mask_token"].is_string() ||
        reply["mask_token"].get<std::string>().empty())
      throw WorkerProtocolError("hello: missing mask_token");
    info_.mask_token = reply["mask_token"].get<std::string>();
    if (info_.special_overhead >= info_.max_input_tokens)
      throw WorkerProtocolError("hello: special_overhead must be below max_input_tokens");
  }

  const ScorerInfo& info() const override { return info_; }

  TokenSeq tokenize(std::string_view text) const override {
    const auto reply = request({{"op", "tokenize"}, {"text", text}});
    return get_strings(reply, "tokens", "tokenize");
  }

  std::string detokenize(std::span<const Token> tokens) const override {
    const auto reply = request({{"op", "detokenize"}, {"tokens", to_array(tokens)}});
    if (!reply.contains("text") || !reply["text"].is_string())
      throw WorkerProtocolError("detokenize: reply lacks string field 'text'");
    return reply["text"].get<std::string>();
  }

  std::vector<double> score(const PromptInput& prompt,
                            std::span<const Token> label_words) const override {
    check_prompt(prompt, info_);
    auto msg = prompt_json(prompt);
    msg["op"] = "score";
    msg["label_words"] = to_array(label_words);
    const auto reply = request(msg);
    if (!reply.contains("logits") || !reply["logits"].is_array())
      throw WorkerProtocolError("score: reply lacks array field 'logits'");
    std::vector<double> out;
    for (const auto& v : reply["logits"]) {
      if (!v.is_number()) throw WorkerProtocolError("score: non-numeric logit");
      out.push_back(v.get<double>());
      if (!std::isfinite(out.back())) throw WorkerProtocolError("score: non-finite logit");
    }
    if (out.size() != label_words.size())
      throw WorkerProtocolError("score: expected " + std::to_string(label_words.size()) +
                                " logits, got " + std::to_string(out.size()));
    return out;
  }

  double train(std::span<const TrainExample> examples,
               std::span<const Token> label_words, const HyperParams& hp,
               std::uint64_t seed) override {
    if (examples.empty()) throw ConfigError("train needs at least one example");
    hp.validate();
    nlohmann::json ex = nlohmann::json::array();
    for (const auto& e : examples) {
      check_prompt(e.prompt, info_);
      auto j = prompt_json(e.prompt);
      j["gold"] = e.gold_class_index;
      ex.push_back(std::move(j));
    }
    const auto reply = request({{"op", "train"},
                                {"examples", std::move(ex)},
                                {"label_words", to_array(label_words)},
                                {"lr", hp.learning_rate},
                                {"batch_size", hp.batch_size},
                                {"epochs", hp.epochs},
                                {"seed", seed}});
    if (!reply.contains("loss") || !reply["loss"].is_number())
      throw WorkerProtocolError("train: reply lacks numeric field 'loss'");
    const double loss = reply["loss"].get<double>();
    if (!std::isfinite(loss)) throw DivergenceDetected("worker reported non-finite loss");
    return loss;
  }

  void reset() override {
    const auto reply = request({{"op", "reset"}});
    if (!reply.contains("ok") || reply["ok"] != true)
      throw WorkerProtocolError("reset: worker did not acknowledge");
  }

  std::string describe() const override {
    return "worker(" + command_ + ",max=" + std::to_string(info_.max_input_tokens) +
           ",overhead=" + std::to_string(info_.special_overhead) +
           ",mask=" + info_.mask_token + ")";
  }

 private:
  nlohmann::json request(const nlohmann::json& msg) const {
    std::lock_guard lock(mutex_);
    const std::string op = msg.at("op").get<std::string>();
    process_.write_line(msg.dump());
    const std::string line = process_.read_line(timeout_);
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw WorkerProtocolError(op + ": reply is not valid JSON");
    }
    if (!reply.is_object()) throw WorkerProtocolError(op + ": reply is not a JSON object");
    if (reply.contains("error")) {
      const std::string code = reply["error"].is_string() ? reply["error"].get<std::string>()
                                                          : reply["error"].dump();
      std::string message = reply.value("message", std::string{});
      if (code == "DivergenceDetected") throw DivergenceDetected(message);
      if (code == "InputTooLong") throw InputTooLong(message);
      throw WorkerProtocolError(op + ": worker error " + code +
                                (message.empty() ? "" : ": " + message));
    }
    return reply;
  }

  static nlohmann::json to_array(std::span<const Token> tokens) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& t : tokens) a.push_back(t);
    return a;
  }

  static nlohmann::json prompt_json(const PromptInput& p) {
    return {{"tokens", to_array(p.tokens)},
            {"mask_index", p.mask_index},
            {"template_span", {p.template_begin, p.template_end}}};
  }

  static std::size_t get_count(const nlohmann::json& j, const char* field, const char* op) {
    if (!j.contains(field) || !j[field].is_number_unsigned())
      throw WorkerProtocolError(std::string(op) + ": reply lacks non-negative integer '" +
                                field + "'");
    return j[field].get<std::size_t>();
  }

  static TokenSeq get_strings(const nlohmann::json& j, const char* field, const char* op) {
    if (!j.contains(field) || !j[field].is_array())
      throw WorkerProtocolError(std::string(op) + ": reply lacks array field '" + field + "'");
    TokenSeq out;
    for (const auto& v : j[field]) {
      if (!v.is_string())
        throw WorkerProtocolError(std::string(op) + ": '" + field + "' holds a non-string");
      out.push_back(v.get<std::string>());
    }
    return out;
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mutex_;
  mutable WorkerProcess process_;
  ScorerInfo info_;
};

}  // namespace koti

// Copyright 2026 The MBNAS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Client side of the external training-worker protocol.
//
// Messages are single-line JSON documents, over either a child process's
// stdin/stdout or one TCP connection:
//
//   -> {"type":"hello","version":1}          <- {"type":"hello","version":1}
//   -> {"type":"evaluate","id":..,"ir":{..},"train_config":{..}}
//   <- {"type":"result","id":..,"status":"ok"|"failed",
//       "curves":[{"fold":f,"seed":s,"dice":[..]}],"params_reported":n,
//       "error":"..","training_started":bool}
//   either side may send {"type":"ping"}; the peer answers {"type":"pong"}.
//
// The aggregate fitness is always recomputed here from the raw curves.

#ifndef MBNAS_WORKER_CLIENT_HPP_
#define MBNAS_WORKER_CLIENT_HPP_

#include <chrono>
#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstring>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "mbnas/arch_compiler.hpp"
#include "mbnas/common.hpp"
#include "mbnas/evaluation.hpp"

namespace mbnas {

inline constexpr int kWorkerProtocolVersion = 1;

// Bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  // nullopt on timeout; throws WorkerError when the peer is gone.
  virtual std::optional<std::string> recv_line(std::chrono::milliseconds timeout) = 0;
};

class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  ~FdChannel() override { close_fds(); }
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void send_line(const std::string& line) override {
    std::string data = line + "\n";
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      ssize_t n = ::write(write_fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw WorkerError(std::string("worker write failed: ") + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> recv_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      if (eof_) throw WorkerError("worker closed the connection");
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{read_fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw WorkerError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) return std::nullopt;
      char chunk[4096];
      ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw WorkerError(std::string("worker read failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        eof_ = true;
        continue;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  void close_fds() {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
  bool eof_ = false;
};

// Runs `/bin/sh -c command` with its stdin/stdout connected to the channel.
class SubprocessChannel : public FdChannel {
 public:
  static std::unique_ptr<SubprocessChannel> spawn(const std::string& command) {
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0) throw WorkerError("pipe failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw WorkerError("pipe failed");
    }
    ::signal(SIGPIPE, SIG_IGN);
    pid_t pid = ::fork();
    if (pid < 0) throw WorkerError("fork failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::unique_ptr<SubprocessChannel>(
        new SubprocessChannel(from_child[0], to_child[1], pid));
  }

  ~SubprocessChannel() override {
    close_fds();
    if (pid_ > 0) {
      int status = 0;
      // Give the worker a moment to exit on EOF before terminating it.
      for (int i = 0; i < 20; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        ::usleep(5000);
      }
      ::kill(pid_, SIGTERM);
      ::waitpid(pid_, &status, 0);
    }
  }

 private:
  SubprocessChannel(int rfd, int wfd, pid_t pid) : FdChannel(rfd, wfd), pid_(pid) {}
  pid_t pid_;
};

class TcpChannel : public FdChannel {
 public:
  static std::unique_ptr<TcpChannel> connect(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
      throw WorkerError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (addrinfo* a = res; a; a = a->ai_next) {
      fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw WorkerError("cannot connect to worker at " + host + ":" + port);
    ::signal(SIGPIPE, SIG_IGN);
    return std::unique_ptr<TcpChannel>(new TcpChannel(fd));
  }

 private:
  explicit TcpChannel(int fd) : FdChannel(fd, fd) {}
};

// "stdio:<shell command>" or "tcp:<host>:<port>".
struct WorkerEndpoint {
  enum class Kind { kStdio, kTcp } kind = Kind::kStdio;
  std::string command;
  std::string host;
  std::string port;

  static WorkerEndpoint parse(const std::string& spec) {
    WorkerEndpoint e;
    if (spec.rfind("stdio:", 0) == 0) {
      e.kind = Kind::kStdio;
      e.command = spec.substr(6);
      if (e.command.empty()) throw ConfigError("empty worker command");
      return e;
    }
    if (spec.rfind("tcp:", 0) == 0) {
      e.kind = Kind::kTcp;
      const std::string rest = spec.substr(4);
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size())
        throw ConfigError("tcp endpoint must be tcp:<host>:<port>");
      e.host = rest.substr(0, colon);
      e.port = rest.substr(colon + 1);
      return e;
    }
    throw ConfigError("worker endpoint must start with stdio: or tcp:");
  }

  std::unique_ptr<LineChannel> open() const {
    if (kind == Kind::kStdio) return SubprocessChannel::spawn(command);
    return TcpChannel::connect(host, port);
  }
};

struct WorkerTimeouts {
  std::chrono::milliseconds heartbeat{30000};
  std::optional<std::chrono::milliseconds> job;  // unlimited when empty
};

namespace detail {

// Checks a worker "result" message against the job and turns it into an
// EvaluationResult.
inline EvaluationResult parse_worker_result(const nlohmann::json& msg, const EvalJobSpec& job,
                                            const std::string& digest) {
  const auto status = msg.value("status", std::string());
  if (status == "failed") {
    return failed_result(digest, "worker-failed: " + msg.value("error", std::string("unknown")),
                         msg.value("training_started", true));
  }
  if (status != "ok") return failed_result(digest, "malformed-response: unknown status");
  if (!msg.contains("curves") || !msg["curves"].is_array())
    return failed_result(digest, "malformed-response: missing curves");
  const auto& tc = job.train_config;
  const auto& curves = msg["curves"];
  if (static_cast<int>(curves.size()) != tc.folds * tc.seeds)
    return failed_result(digest, "curve-count-mismatch: expected " +
                                     std::to_string(tc.folds * tc.seeds) + ", got " +
                                     std::to_string(curves.size()));
  EvaluationResult r;
  r.genotype_digest = digest;
  std::set<std::pair<int, int>> seen;
  try {
    for (const auto& c : curves) {
      Curve curve{c.at("fold").get<int>(), c.at("seed").get<int>(),
                  c.at("dice").get<std::vector<double>>()};
      if (curve.fold < 0 || curve.fold >= tc.folds)
        return failed_result(digest, "malformed-response: fold index out of range");
      if (!seen.insert({curve.fold, curve.seed}).second)
        return failed_result(digest, "malformed-response: duplicate (fold, seed) curve");
      if (curve.dice.empty()) return failed_result(digest, "malformed-response: empty curve");
      for (double v : curve.dice)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
          return failed_result(digest, "out-of-range: Dice value " + std::to_string(v));
      r.curves.push_back(std::move(curve));
    }
    if (msg.contains("params_reported") && !msg["params_reported"].is_null())
      r.params_reported = msg["params_reported"].get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    return failed_result(digest, std::string("malformed-response: ") + e.what());
  }
  r.aggregate = aggregate_score(r.curves);
  r.status = EvalStatus::kOk;
  return r;
}

}  // namespace detail

// One live connection to a worker. Not thread-safe; one job at a time.
class WorkerSession {
 public:
  WorkerSession(std::unique_ptr<LineChannel> channel, WorkerTimeouts timeouts)
      : channel_(std::move(channel)), timeouts_(timeouts) {}

  // Throws WorkerError if the worker does not answer or speaks another version.
  void handshake() {
    channel_->send_line(nlohmann::json{{"type", "hello"}, {"version", kWorkerProtocolVersion}}.dump());
    for (;;) {
      auto line = channel_->recv_line(timeouts_.heartbeat);
      if (!line) throw WorkerError("worker did not answer hello");
      nlohmann::json msg;
      try {
        msg = nlohmann::json::parse(*line);
      } catch (const nlohmann::json::exception&) {
        throw WorkerError("worker sent a malformed hello");
      }
      const auto type = msg.value("type", std::string());
      if (type == "ping") {
        channel_->send_line(R"({"type":"pong"})");
        continue;
      }
      if (type != "hello") throw WorkerError("expected hello, got '" + type + "'");
      if (msg.value("version", -1) != kWorkerProtocolVersion)
        throw WorkerError("worker protocol version mismatch");
      return;
    }
  }

  // Sends the job and blocks for its result. A session that returns a
  // timeout or malformed result should be discarded (see poisoned()).
  EvaluationResult run(const EvalJobSpec& job, const std::string& digest) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const nlohmann::json request = {{"type", "evaluate"},
                                    {"id", job.job_id},
                                    {"ir", job.ir},
                                    {"train_config", train_config_to_json(job.train_config)}};
    channel_->send_line(request.dump());
    bool awaiting_pong = false;
    auto last_heard = start;
    auto finish = [&](EvaluationResult r) {
      r.wall_time = std::chrono::duration<double>(clock::now() - start).count();
      return r;
    };
    for (;;) {
      auto now = clock::now();
      if (timeouts_.job && now - start >= *timeouts_.job) {
        poisoned_ = true;
        return finish(failed_result(digest, "job-timeout"));
      }
      auto until = last_heard + timeouts_.heartbeat;
      if (timeouts_.job) until = std::min(until, start + *timeouts_.job);
      const auto wait = std::max(std::chrono::milliseconds(1),
                                 std::chrono::ceil<std::chrono::milliseconds>(until - now));
      auto line = channel_->recv_line(wait);
      if (!line) {
        now = clock::now();
        if (now - last_heard < timeouts_.heartbeat) continue;
        if (awaiting_pong) {
          poisoned_ = true;
          return finish(failed_result(digest, "worker-timeout: no heartbeat"));
        }
        channel_->send_line(R"({"type":"ping"})");
        awaiting_pong = true;
        last_heard = now;
        continue;
      }
      last_heard = clock::now();
      awaiting_pong = false;
      nlohmann::json msg;
      try {
        msg = nlohmann::json::parse(*line);
      } catch (const nlohmann::json::exception&) {
        poisoned_ = true;
        return finish(failed_result(digest, "malformed-response: not JSON"));
      }
      const auto type = msg.value("type", std::string());
      if (type == "ping") {
        channel_->send_line(R"({"type":"pong"})");
        continue;
      }
      if (type == "pong" || type == "hello") continue;
      if (type != "result") {
        poisoned_ = true;
        return finish(failed_result(digest, "malformed-response: unexpected type '" + type + "'"));
      }
      if (msg.value("id", std::string()) != job.job_id) continue;  // stale reply
      return finish(detail::parse_worker_result(msg, job, digest));
    }
  }

  bool poisoned() const { return poisoned_; }

 private:
  std::unique_ptr<LineChannel> channel_;
  WorkerTimeouts timeouts_;
  bool poisoned_ = false;
};

// Single-shot form: one job over an already-open channel.
inline EvaluationResult external_evaluate(const EvalJobSpec& job, std::unique_ptr<LineChannel> channel,
                                          WorkerTimeouts timeouts = {}) {
  WorkerSession session(std::move(channel), timeouts);
  session.handshake();
  std::string digest = job.ir.value("genotype_digest", std::string());
  return session.run(job, digest);
}

// Evaluator backed by an external worker. Compiles each genotype, ships the
// IR and keeps the session open across calls.
class ExternalEvaluator : public Evaluator {
 public:
  ExternalEvaluator(WorkerEndpoint endpoint, SpaceConfig space, InputShape input, int num_classes,
                    TrainConfig train, WorkerTimeouts timeouts = {})
      : endpoint_(std::move(endpoint)),
        space_(std::move(space)),
        input_(input),
        num_classes_(num_classes),
        train_(std::move(train)),
        timeouts_(timeouts) {}

  EvaluationResult evaluate(const Genotype& g) override {
    const auto ir = compile(g, space_, input_, num_classes_);
    EvalJobSpec job;
    job.job_id = "job-" + std::to_string(++job_counter_);
    job.ir = export_ir(ir);
    job.train_config = train_;
    if (!session_) {
      auto fresh = std::make_unique<WorkerSession>(endpoint_.open(), timeouts_);
      fresh->handshake();
      session_ = std::move(fresh);
    }
    EvaluationResult r;
    try {
      r = session_->run(job, ir.genotype_digest);
    } catch (const WorkerError&) {
      session_.reset();
      throw;
    }
    if (session_->poisoned()) session_.reset();
    return r;
  }

  std::string config_digest() const override {
    nlohmann::json j = {{"train_config", train_config_to_json(train_)},
                        {"input_shape", {input_.channels, input_.height, input_.width}},
                        {"num_classes", num_classes_},
                        {"base_channels", space_.base_channels}};
    return detail::digest_of(j.dump());
  }

 private:
  WorkerEndpoint endpoint_;
  SpaceConfig space_;
  InputShape input_;
  int num_classes_;
  TrainConfig train_;
  WorkerTimeouts timeouts_;
  std::unique_ptr<WorkerSession> session_;
  std::uint64_t job_counter_ = 0;
};

}  // namespace mbnas

#endif  // MBNAS_WORKER_CLIENT_HPP_

// External (out-of-process) policies: newline-delimited canonical JSON over
// a byte stream (pipes, socketpairs, or TCP fds), protocol version "nsl/1".
// One request line per interface call, one response line expected within the
// timeout; anything else surfaces as PolicyProtocolError, which the loop
// records as an aborted, unselected iteration.
#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <string>
#include <vector>

#include "nsl/policy.hpp"

namespace nsl {

constexpr const char* kProtocolVersion = "nsl/1";

inline void to_json(json& j, const PathInfo& p) {
    j = json{{"is_dir", p.is_dir},       {"size", p.size},           {"deletable", p.deletable},
             {"writable", p.writable},   {"compressed", p.compressed}, {"listed", p.listed}};
}
inline void from_json(const json& j, PathInfo& p) {
    j.at("is_dir").get_to(p.is_dir);
    j.at("size").get_to(p.size);
    j.at("deletable").get_to(p.deletable);
    j.at("writable").get_to(p.writable);
    j.at("compressed").get_to(p.compressed);
    j.at("listed").get_to(p.listed);
}

inline void to_json(json& j, const AgentKnowledge& k) {
    j = json{{"known_paths", k.known_paths},
             {"known_credentials", k.known_credentials},
             {"required_credentials", k.required_credentials},
             {"known_containers", k.known_containers},
             {"unlocked_containers", k.unlocked_containers},
             {"recent_learnings", k.recent_learnings}};
}
inline void from_json(const json& j, AgentKnowledge& k) {
    j.at("known_paths").get_to(k.known_paths);
    j.at("known_credentials").get_to(k.known_credentials);
    j.at("required_credentials").get_to(k.required_credentials);
    j.at("known_containers").get_to(k.known_containers);
    j.at("unlocked_containers").get_to(k.unlocked_containers);
    j.at("recent_learnings").get_to(k.recent_learnings);
}

/// Line-framed byte channel over POSIX fds with a receive deadline.
class LineChannel {
public:
    LineChannel(int read_fd, int write_fd, double timeout_seconds = 30.0)
        : read_fd_(read_fd), write_fd_(write_fd), timeout_ms_(static_cast<int>(timeout_seconds * 1000)) {}

    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;

    ~LineChannel() { close_fds(); }

    void close_fds() {
        if (read_fd_ >= 0) ::close(read_fd_);
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
        read_fd_ = write_fd_ = -1;
    }

    void send_line(const std::string& line) {
        std::string framed = line + "\n";
        std::size_t off = 0;
        while (off < framed.size()) {
            const auto n = ::write(write_fd_, framed.data() + off, framed.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw PolicyProtocolError(std::string("channel write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string recv_line() {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
        while (true) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline) throw PolicyProtocolError("timeout waiting for policy response");
            pollfd pfd{read_fd_, POLLIN, 0};
            const auto wait_ms = static_cast<int>(
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
            const int rc = ::poll(&pfd, 1, std::max(1, wait_ms));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw PolicyProtocolError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) throw PolicyProtocolError("timeout waiting for policy response");
            char chunk[4096];
            const auto n = ::read(read_fd_, chunk, sizeof chunk);
            if (n == 0) throw PolicyProtocolError("policy channel closed");
            if (n < 0) {
                if (errno == EINTR) continue;
                throw PolicyProtocolError(std::string("channel read failed: ") + std::strerror(errno));
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int read_fd_;
    int write_fd_;
    int timeout_ms_;
    std::string buffer_;
};

inline json make_policy_request(const std::string& call, json payload, json trajectory_context = json::object()) {
    return json{{"protocol", kProtocolVersion},
                {"call", call},
                {"payload", std::move(payload)},
                {"trajectory_context", std::move(trajectory_context)}};
}

/// PolicyInterface backed by a request/response line protocol. Strictly one
/// request in flight per instance.
class ExternalPolicy : public PolicyInterface {
public:
    explicit ExternalPolicy(std::shared_ptr<LineChannel> channel) : channel_(std::move(channel)) {}

    std::string name() const override { return "external"; }

    Script propose_exploration(const AgentKnowledge& k) override {
        auto r = roundtrip("propose_exploration", json{{"knowledge", k}});
        auto s = expect_script(r);
        s.stage_tag = StageTag::exploration;
        return s;
    }

    std::vector<Strategy> propose_strategies(const AgentKnowledge& k) override {
        auto r = roundtrip("propose_strategies", json{{"knowledge", k}});
        if (!r.contains("strategies") || !r["strategies"].is_array())
            throw PolicyProtocolError("response missing strategies");
        try {
            return r["strategies"].get<std::vector<Strategy>>();
        } catch (const std::exception& e) {
            throw PolicyProtocolError(std::string("malformed strategies: ") + e.what());
        }
    }

    Script choose_and_render(const std::vector<Strategy>& options, int n, const AgentKnowledge& k) override {
        auto r = roundtrip("choose_and_render",
                           json{{"options", options}, {"n", n}, {"knowledge", k}});
        return expect_script(r);
    }

    Script repair(const Script& failed, const StructuredError& error, int next_attempt,
                  const AgentKnowledge& k) override {
        auto r = roundtrip("repair", json{{"script", failed},
                                          {"error", error},
                                          {"error_text", render_error(error)},
                                          {"attempt", next_attempt},
                                          {"knowledge", k}});
        return expect_script(r);
    }

private:
    json roundtrip(const std::string& call, json payload) {
        channel_->send_line(make_policy_request(call, std::move(payload)).dump());
        const auto line = channel_->recv_line();
        json r;
        try {
            r = json::parse(line);
        } catch (const std::exception&) {
            throw PolicyProtocolError("malformed response: not JSON");
        }
        if (!r.is_object() || r.value("protocol", "") != kProtocolVersion)
            throw PolicyProtocolError("malformed response: bad protocol field");
        if (r.contains("error")) throw PolicyProtocolError("policy error: " + r["error"].dump());
        if (!r.contains("result") || !r["result"].is_object())
            throw PolicyProtocolError("malformed response: missing result");
        return r["result"];
    }

    static Script expect_script(const json& result) {
        if (!result.contains("script")) throw PolicyProtocolError("response missing script");
        try {
            return result.at("script").get<Script>();
        } catch (const std::exception& e) {
            throw PolicyProtocolError(std::string("malformed script: ") + e.what());
        }
    }

    std::shared_ptr<LineChannel> channel_;
};

/// Spawns `argv` with stdin/stdout wired to the returned channel.
struct PolicyProcess {
    pid_t pid = -1;
    std::shared_ptr<LineChannel> channel;

    ~PolicyProcess() {
        if (channel) channel->close_fds();
        if (pid > 0) {
            int status = 0;
            if (::waitpid(pid, &status, WNOHANG) == 0) {
                ::kill(pid, SIGTERM);
                ::waitpid(pid, &status, 0);
            }
        }
    }
};

inline PolicyProcess spawn_policy_process(const std::vector<std::string>& argv, double timeout_seconds = 30.0) {
    if (argv.empty()) throw ConfigError("policy command is empty");
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
        throw std::runtime_error("pipe() failed");
    const pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error("fork() failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        std::vector<char*> cargv;
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        ::execvp(cargv[0], cargv.data());
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    ::signal(SIGPIPE, SIG_IGN);
    PolicyProcess proc;
    proc.pid = pid;
    proc.channel = std::make_shared<LineChannel>(from_child[0], to_child[1], timeout_seconds);
    return proc;
}

}  // namespace nsl

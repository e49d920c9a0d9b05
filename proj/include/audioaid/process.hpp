#pragma once

// POSIX child-process plumbing shared by the detector, OCR engine, and
// speech engine adapters. Command templates are split argv-style; no shell
// ever interprets them.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <chrono>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "audioaid/error.hpp"

extern char** environ;

namespace audioaid::process {

using Clock = std::chrono::steady_clock;

struct SpawnFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Splits a command template into argv. Whitespace separates arguments;
/// single quotes are literal, double quotes allow backslash escapes.
inline std::vector<std::string> split_command(std::string_view command)
{
    std::vector<std::string> argv;
    std::string current;
    bool in_arg = false;
    for (std::size_t i = 0; i < command.size(); ++i) {
        const char c = command[i];
        if (c == '\'') {
            const auto close = command.find('\'', i + 1);
            if (close == std::string_view::npos) throw Error(ErrorKind::Config, "unterminated quote in command");
            current.append(command.substr(i + 1, close - i - 1));
            i = close;
            in_arg = true;
        } else if (c == '"') {
            std::size_t j = i + 1;
            for (; j < command.size() && command[j] != '"'; ++j) {
                if (command[j] == '\\' && j + 1 < command.size()) ++j;
                current.push_back(command[j]);
            }
            if (j >= command.size()) throw Error(ErrorKind::Config, "unterminated quote in command");
            i = j;
            in_arg = true;
        } else if (c == '\\' && i + 1 < command.size()) {
            current.push_back(command[++i]);
            in_arg = true;
        } else if (c == ' ' || c == '\t' || c == '\n') {
            if (in_arg) argv.push_back(std::move(current));
            current.clear();
            in_arg = false;
        } else {
            current.push_back(c);
            in_arg = true;
        }
    }
    if (in_arg) argv.push_back(std::move(current));
    return argv;
}

inline bool contains_placeholder(const std::vector<std::string>& argv, std::string_view placeholder)
{
    for (const auto& arg : argv) {
        if (arg.find(placeholder) != std::string::npos) return true;
    }
    return false;
}

/// Replaces every occurrence of placeholder inside each argument. The value
/// never splits into more arguments.
inline std::vector<std::string> substitute(std::vector<std::string> argv, std::string_view placeholder,
                                           std::string_view value)
{
    for (auto& arg : argv) {
        std::size_t pos = 0;
        while ((pos = arg.find(placeholder, pos)) != std::string::npos) {
            arg.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return argv;
}

/// Writing to a child that already exited must surface as EPIPE, not kill us.
inline void ignore_sigpipe()
{
    static const bool once = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)once;
}

enum class ReadStatus { Line, Timeout, Eof };

/// A spawned child in its own process group. The destructor kills the
/// group and reaps the child.
class Child {
public:
    Child() = default;
    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;
    Child(Child&& other) noexcept { *this = std::move(other); }
    Child& operator=(Child&& other) noexcept
    {
        if (this != &other) {
            terminate();
            pid_ = std::exchange(other.pid_, -1);
            in_fd_ = std::exchange(other.in_fd_, -1);
            out_fd_ = std::exchange(other.out_fd_, -1);
            buffer_ = std::move(other.buffer_);
            exit_status_ = other.exit_status_;
        }
        return *this;
    }
    ~Child() { terminate(); }

    static Child spawn(const std::vector<std::string>& argv, bool pipe_stdin, bool pipe_stdout)
    {
        if (argv.empty()) throw SpawnFailure("empty command");
        ignore_sigpipe();
        int in_pipe[2] = {-1, -1};
        int out_pipe[2] = {-1, -1};
        auto close_all = [&] {
            for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
                if (fd >= 0) ::close(fd);
            }
        };
        if ((pipe_stdin && ::pipe2(in_pipe, O_CLOEXEC) != 0) || (pipe_stdout && ::pipe2(out_pipe, O_CLOEXEC) != 0)) {
            close_all();
            throw SpawnFailure(std::string("pipe: ") + std::strerror(errno));
        }

        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        int null_fd = -1;
        if (pipe_stdin) {
            posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
        } else {
            null_fd = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
            if (null_fd >= 0) posix_spawn_file_actions_adddup2(&actions, null_fd, STDIN_FILENO);
        }
        if (pipe_stdout) posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

        posix_spawnattr_t attr;
        posix_spawnattr_init(&attr);
        posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGDEF);
        posix_spawnattr_setpgroup(&attr, 0);
        sigset_t defaults;
        sigemptyset(&defaults);
        sigaddset(&defaults, SIGPIPE);
        sigaddset(&defaults, SIGINT);
        posix_spawnattr_setsigdefault(&attr, &defaults);

        std::vector<char*> raw;
        raw.reserve(argv.size() + 1);
        for (const auto& arg : argv) raw.push_back(const_cast<char*>(arg.c_str()));
        raw.push_back(nullptr);

        pid_t pid = -1;
        const int rc = posix_spawnp(&pid, raw[0], &actions, &attr, raw.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        posix_spawnattr_destroy(&attr);
        if (null_fd >= 0) ::close(null_fd);
        if (rc != 0) {
            close_all();
            throw SpawnFailure("cannot start '" + argv[0] + "': " + std::strerror(rc));
        }

        Child child;
        child.pid_ = pid;
        if (pipe_stdin) {
            ::close(in_pipe[0]);
            child.in_fd_ = in_pipe[1];
        }
        if (pipe_stdout) {
            ::close(out_pipe[1]);
            child.out_fd_ = out_pipe[0];
        }
        return child;
    }

    pid_t pid() const noexcept { return pid_; }
    bool running() const noexcept { return pid_ > 0; }

    bool write_all(std::string_view data)
    {
        while (!data.empty()) {
            const ssize_t n = ::write(in_fd_, data.data(), data.size());
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            data.remove_prefix(static_cast<std::size_t>(n));
        }
        return true;
    }

    void close_stdin()
    {
        if (in_fd_ >= 0) ::close(std::exchange(in_fd_, -1));
    }

    /// Reads one '\n'-terminated line (terminator stripped) before the deadline.
    ReadStatus read_line(std::string& line, Clock::time_point deadline)
    {
        for (;;) {
            if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
                line.assign(buffer_, 0, nl);
                buffer_.erase(0, nl + 1);
                return ReadStatus::Line;
            }
            switch (fill(deadline)) {
            case FillResult::Data: break;
            case FillResult::Timeout: return ReadStatus::Timeout;
            case FillResult::Eof:
                if (buffer_.empty()) return ReadStatus::Eof;
                line = std::exchange(buffer_, {});
                return ReadStatus::Line;
            }
        }
    }

    /// Reads stdout until EOF; false when the deadline passed first.
    bool read_all(std::string& out, Clock::time_point deadline)
    {
        for (;;) {
            switch (fill(deadline)) {
            case FillResult::Data: break;
            case FillResult::Timeout: return false;
            case FillResult::Eof: out = std::exchange(buffer_, {}); return true;
            }
        }
    }

    /// Exit status (128 + signal for signalled children), or nullopt at deadline.
    std::optional<int> wait_until(Clock::time_point deadline)
    {
        if (pid_ <= 0) return exit_status_;
        for (;;) {
            int status = 0;
            const pid_t r = ::waitpid(pid_, &status, WNOHANG);
            if (r == pid_) {
                pid_ = -1;
                exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
                return exit_status_;
            }
            if (r < 0 && errno != EINTR) {
                pid_ = -1;
                return exit_status_;
            }
            if (Clock::now() >= deadline) return std::nullopt;
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    }

    void terminate() noexcept
    {
        close_stdin();
        if (pid_ > 0) {
            ::kill(-pid_, SIGKILL);
            ::kill(pid_, SIGKILL);
            int status = 0;
            while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
            }
            pid_ = -1;
        }
        if (out_fd_ >= 0) ::close(std::exchange(out_fd_, -1));
    }

private:
    enum class FillResult { Data, Timeout, Eof };

    FillResult fill(Clock::time_point deadline)
    {
        if (out_fd_ < 0) return FillResult::Eof;
        for (;;) {
            const auto remaining =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            if (remaining <= 0) return FillResult::Timeout;
            pollfd pfd{out_fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1000)));
            if (rc < 0) {
                if (errno == EINTR) continue;
                return FillResult::Eof;
            }
            if (rc == 0) continue;
            char chunk[4096];
            const ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                return FillResult::Eof;
            }
            if (n == 0) return FillResult::Eof;
            buffer_.append(chunk, static_cast<std::size_t>(n));
            return FillResult::Data;
        }
    }

    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    std::string buffer_;
    std::optional<int> exit_status_;
};

struct RunResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;
};

/// Runs argv to completion, capturing stdout. A child still running at the
/// deadline is killed along with its process group.
inline RunResult run(const std::vector<std::string>& argv, std::chrono::milliseconds timeout, bool capture = true)
{
    const auto deadline = Clock::now() + timeout;
    Child child = Child::spawn(argv, false, capture);
    RunResult result;
    if (capture && !child.read_all(result.output, deadline)) {
        result.timed_out = true;
        child.terminate();
        return result;
    }
    if (auto status = child.wait_until(deadline)) {
        result.exit_code = *status;
    } else {
        result.timed_out = true;
        child.terminate();
    }
    return result;
}

}  // namespace audioaid::process

#pragma once

// Speech output: a priority queue of utterances drained by one worker into
// one or more voices (transcript file, external TTS command, memory).

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "audioaid/error.hpp"
#include "audioaid/log.hpp"
#include "audioaid/process.hpp"

namespace audioaid {

enum class Priority { Hazard, Normal };

inline const char* to_string(Priority p) { return p == Priority::Hazard ? "hazard" : "normal"; }

struct Utterance {
    std::string text;
    Priority priority = Priority::Normal;
    double created_at = 0;  // seconds on the pipeline clock

    friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// One audio (or audio stand-in) output. speak() returns false when the
/// utterance was dropped; the voice logs why.
class Voice {
public:
    virtual ~Voice() = default;
    virtual bool speak(const Utterance& u) = 0;
};

/// "<seconds, 3 decimals>\t<priority>\t<text>\n" per utterance, flushed per line.
inline std::string transcript_line(const Utterance& u)
{
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%.3f", u.created_at);
    return std::string(stamp) + "\t" + to_string(u.priority) + "\t" + u.text + "\n";
}

class TranscriptVoice : public Voice {
public:
    explicit TranscriptVoice(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc)
    {
        if (!out_) throw Error(ErrorKind::Io, "cannot open transcript " + path.string());
    }

    bool speak(const Utterance& u) override
    {
        out_ << transcript_line(u);
        out_.flush();
        if (!out_) throw Error(ErrorKind::Io, "transcript write failed");
        return true;
    }

private:
    std::ofstream out_;
};

/// Transcript lines to an already-open stream (stdout in the CLI).
class StreamVoice : public Voice {
public:
    explicit StreamVoice(std::ostream& out) : out_(out) {}

    bool speak(const Utterance& u) override
    {
        out_ << transcript_line(u);
        out_.flush();
        return true;
    }

private:
    std::ostream& out_;
};

class MemoryVoice : public Voice {
public:
    bool speak(const Utterance& u) override
    {
        std::lock_guard lock(mu_);
        spoken_.push_back(u);
        return true;
    }

    std::vector<Utterance> spoken() const
    {
        std::lock_guard lock(mu_);
        return spoken_;
    }

private:
    mutable std::mutex mu_;
    std::vector<Utterance> spoken_;
};

/// Spawns the configured command once per utterance, with "{text}" replaced
/// by the utterance as a single argument. Runs are strictly sequential.
class EngineVoice : public Voice {
public:
    EngineVoice(std::string command_template, std::chrono::milliseconds timeout, LogFn log = stderr_logger())
        : argv_(process::split_command(command_template)), timeout_(timeout), log_(std::move(log))
    {
        if (!process::contains_placeholder(argv_, "{text}")) {
            throw Error(ErrorKind::Config, "speech command must contain {text}");
        }
    }

    bool speak(const Utterance& u) override
    {
        try {
            auto result = process::run(process::substitute(argv_, "{text}", u.text), timeout_, false);
            if (result.timed_out) {
                log_("speech engine timed out; dropped \"" + u.text + "\"");
                return false;
            }
            if (result.exit_code != 0) {
                log_("speech engine exited " + std::to_string(result.exit_code) + " for \"" + u.text + "\"");
                return false;
            }
            return true;
        } catch (const process::SpawnFailure& e) {
            log_(std::string("speech engine unavailable: ") + e.what() + "; dropped \"" + u.text + "\"");
            return false;
        }
    }

private:
    std::vector<std::string> argv_;
    std::chrono::milliseconds timeout_;
    LogFn log_;
};

struct SpeechOptions {
    std::size_t capacity = 32;
    double stale_after = 5.0;  // seconds; normal utterances older than this are dropped when a hazard arrives
};

struct SpeechStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t spoken = 0;
    std::size_t dropped_stale = 0;
    std::size_t dropped_by_voice = 0;
};

/// Hazards jump ahead of every queued normal utterance; equal priorities
/// stay FIFO. Single producer, single consumer.
class SpeechSink {
public:
    explicit SpeechSink(std::vector<std::unique_ptr<Voice>> voices, SpeechOptions opts = {},
                        LogFn log = stderr_logger())
        : voices_(std::move(voices)), opts_(opts), log_(std::move(log))
    {
    }

    SpeechSink(const SpeechSink&) = delete;
    SpeechSink& operator=(const SpeechSink&) = delete;
    ~SpeechSink()
    {
        try {
            close();
        } catch (...) {
        }
    }

    bool enqueue(Utterance u)
    {
        if (u.text.empty()) throw Error(ErrorKind::InvalidInput, "utterance text is empty");
        std::lock_guard lock(mu_);
        if (closed_) throw Error(ErrorKind::SinkClosed, "speech sink is closed");
        if (u.priority == Priority::Hazard) {
            const double cutoff = u.created_at - opts_.stale_after;
            for (auto it = queue_.begin(); it != queue_.end();) {
                if (it->priority == Priority::Normal && it->created_at < cutoff) {
                    log_("dropped stale \"" + it->text + "\"");
                    ++stats_.dropped_stale;
                    it = queue_.erase(it);
                } else {
                    ++it;
                }
            }
            auto first_normal = std::find_if(queue_.begin(), queue_.end(),
                                             [](const Utterance& q) { return q.priority == Priority::Normal; });
            queue_.insert(first_normal, std::move(u));
        } else {
            if (queue_.size() >= opts_.capacity) {
                ++stats_.rejected;
                return false;
            }
            queue_.push_back(std::move(u));
        }
        ++stats_.accepted;
        cv_.notify_all();
        return true;
    }

    /// Starts the speaking worker. Without it, pump() drains synchronously.
    void start()
    {
        std::lock_guard lock(mu_);
        if (worker_.joinable() || closed_) return;
        worker_ = std::thread([this] { run(); });
    }

    /// Speaks everything queued on the calling thread; returns how many were taken.
    std::size_t pump()
    {
        std::size_t taken = 0;
        while (auto u = take(false)) {
            deliver(*u);
            ++taken;
        }
        return taken;
    }

    /// Blocks until the queue is empty and nothing is being spoken.
    /// Without a worker this speaks the queue on the calling thread.
    void wait_idle()
    {
        if (!worker_.joinable()) {
            pump();
            return;
        }
        std::unique_lock lock(mu_);
        idle_cv_.wait(lock, [this] { return queue_.empty() && !speaking_; });
    }

    /// Stops accepting, speaks what is queued, and joins the worker.
    void close()
    {
        {
            std::lock_guard lock(mu_);
            if (closed_ && !worker_.joinable()) return;
            closed_ = true;
            cv_.notify_all();
        }
        if (worker_.joinable()) {
            worker_.join();
        } else {
            pump();
        }
    }

    std::size_t queued() const
    {
        std::lock_guard lock(mu_);
        return queue_.size();
    }

    SpeechStats stats() const
    {
        std::lock_guard lock(mu_);
        return stats_;
    }

private:
    std::optional<Utterance> take(bool block)
    {
        std::unique_lock lock(mu_);
        if (block) cv_.wait(lock, [this] { return !queue_.empty() || closed_; });
        if (queue_.empty()) return std::nullopt;
        Utterance u = std::move(queue_.front());
        queue_.pop_front();
        speaking_ = true;
        return u;
    }

    void deliver(const Utterance& u)
    {
        bool ok = true;
        for (auto& voice : voices_) {
            try {
                ok = voice->speak(u) && ok;
            } catch (const std::exception& e) {
                log_(std::string("voice failed: ") + e.what());
                ok = false;
            }
        }
        std::lock_guard lock(mu_);
        ++(ok ? stats_.spoken : stats_.dropped_by_voice);
        speaking_ = false;
        idle_cv_.notify_all();
    }

    void run()
    {
        while (auto u = take(true)) deliver(*u);
    }

    std::vector<std::unique_ptr<Voice>> voices_;
    SpeechOptions opts_;
    LogFn log_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<Utterance> queue_;
    SpeechStats stats_;
    bool closed_ = false;
    bool speaking_ = false;
    std::thread worker_;
};

inline std::unique_ptr<SpeechSink> transcript_sink(const std::filesystem::path& path, SpeechOptions opts = {})
{
    std::vector<std::unique_ptr<Voice>> voices;
    voices.push_back(std::make_unique<TranscriptVoice>(path));
    return std::make_unique<SpeechSink>(std::move(voices), opts);
}

inline std::unique_ptr<SpeechSink> external_engine_sink(const std::string& command_template,
                                                        std::chrono::milliseconds timeout, SpeechOptions opts = {},
                                                        LogFn log = stderr_logger())
{
    std::vector<std::unique_ptr<Voice>> voices;
    voices.push_back(std::make_unique<EngineVoice>(command_template, timeout, log));
    return std::make_unique<SpeechSink>(std::move(voices), opts, std::move(log));
}

}  // namespace audioaid

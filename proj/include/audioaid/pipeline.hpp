#pragma once

// Frame sources, the staged real-time loop, and the two operating modes.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "audioaid/arbiter.hpp"
#include "audioaid/detection.hpp"
#include "audioaid/detector.hpp"
#include "audioaid/error.hpp"
#include "audioaid/frame.hpp"
#include "audioaid/labels.hpp"
#include "audioaid/log.hpp"
#include "audioaid/metrics.hpp"
#include "audioaid/ocr.hpp"
#include "audioaid/pnm.hpp"
#include "audioaid/speech.hpp"

namespace audioaid {

// ---- sources ---------------------------------------------------------------

/// Frames with strictly increasing index from 0 and timestamp index * period.
class FrameSource {
public:
    explicit FrameSource(double period) : period_(period)
    {
        if (!(period >= 0)) throw Error(ErrorKind::InvalidParameter, "frame period must be >= 0");
    }
    virtual ~FrameSource() = default;

    std::optional<Frame> next()
    {
        auto frame = produce(next_index_);
        if (!frame) return std::nullopt;
        frame->index = next_index_;
        frame->timestamp = static_cast<double>(next_index_) * period_;
        ++next_index_;
        return frame;
    }

    double period() const noexcept { return period_; }

protected:
    virtual std::optional<Frame> produce(std::int64_t index) = 0;

private:
    double period_;
    std::int64_t next_index_ = 0;
};

/// Decodes PGM/PPM files lazily, in list order.
class FileSource : public FrameSource {
public:
    FileSource(std::vector<std::filesystem::path> files, double period)
        : FrameSource(period), files_(std::move(files))
    {
    }

    /// Every *.pgm / *.ppm / *.pnm directly inside dir, sorted by filename.
    static std::vector<std::filesystem::path> list_directory(const std::filesystem::path& dir)
    {
        std::error_code ec;
        if (!std::filesystem::is_directory(dir, ec)) {
            throw Error(ErrorKind::InvalidInput, "not a directory: " + dir.string());
        }
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            const auto ext = entry.path().extension().string();
            if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end(),
                  [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
        return files;
    }

protected:
    std::optional<Frame> produce(std::int64_t index) override
    {
        if (static_cast<std::size_t>(index) >= files_.size()) return std::nullopt;
        const auto& path = files_[static_cast<std::size_t>(index)];
        return Frame{pnm::read(path), 0, 0, path};
    }

private:
    std::vector<std::filesystem::path> files_;
};

/// In-memory frames, mostly for tests.
class RasterSource : public FrameSource {
public:
    RasterSource(std::vector<Raster> images, double period) : FrameSource(period), images_(std::move(images)) {}

protected:
    std::optional<Frame> produce(std::int64_t index) override
    {
        if (static_cast<std::size_t>(index) >= images_.size()) return std::nullopt;
        return Frame{images_[static_cast<std::size_t>(index)], 0, 0, {}};
    }

private:
    std::vector<Raster> images_;
};

/// Generated gradient frames; content depends only on index and shape.
class SyntheticSource : public FrameSource {
public:
    SyntheticSource(std::size_t count, int width, int height, int channels, double period)
        : FrameSource(period), count_(count), width_(width), height_(height), channels_(channels)
    {
    }

    static Raster make(std::int64_t index, int width, int height, int channels)
    {
        Raster r(width, height, channels);
        auto s = r.samples();
        std::size_t i = 0;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                for (int c = 0; c < channels; ++c) {
                    s[i++] = static_cast<std::uint8_t>((x + 2 * y + 37 * c + 11 * index) & 0xff);
                }
            }
        }
        return r;
    }

protected:
    std::optional<Frame> produce(std::int64_t index) override
    {
        if (static_cast<std::size_t>(index) >= count_) return std::nullopt;
        return Frame{make(index, width_, height_, channels_), 0, 0, {}};
    }

private:
    std::size_t count_;
    int width_, height_, channels_;
};

// ---- hand-off queue --------------------------------------------------------

enum class Overflow { Block, DropOldest };

template <class T>
class BoundedQueue {
public:
    BoundedQueue(std::size_t capacity, Overflow policy) : capacity_(capacity), policy_(policy)
    {
        if (capacity == 0) throw Error(ErrorKind::InvalidParameter, "queue capacity must be >= 1");
    }

    /// Returns how many items were lost making room (or the item itself,
    /// if the queue was closed while waiting).
    std::size_t push(T item)
    {
        std::unique_lock lock(mu_);
        std::size_t lost = 0;
        if (policy_ == Overflow::Block) {
            not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        } else {
            while (items_.size() >= capacity_) {
                items_.pop_front();
                ++lost;
            }
        }
        if (closed_) return lost + 1;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return lost;
    }

    /// Blocks; nullopt once closed and empty.
    std::optional<T> pop()
    {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close()
    {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    /// Closes and throws away whatever is queued; returns the count.
    std::size_t discard()
    {
        std::lock_guard lock(mu_);
        closed_ = true;
        const std::size_t n = items_.size();
        items_.clear();
        not_empty_.notify_all();
        not_full_.notify_all();
        return n;
    }

private:
    std::size_t capacity_;
    Overflow policy_;
    std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> items_;
    bool closed_ = false;
};

// ---- configuration ---------------------------------------------------------

enum class Mode { Detect, Read };

/// Simulated: lossless hand-off and speech settled between frames, so a
/// file replay is deterministic. Live: frames arrive on the wall clock at
/// the source period and the staging queue drops its oldest frame.
enum class Pacing { Simulated, Live };

enum class Execution { Concurrent, Reference };

struct PipelineConfig {
    Mode mode = Mode::Detect;
    Pacing pacing = Pacing::Simulated;
    Execution execution = Execution::Concurrent;
    std::size_t queue_capacity = 2;
    ArbiterConfig arbiter;
    LabelTable labels = LabelTable::defaults();
    double conf_threshold = kDefaultConfThreshold;
    double iou_threshold = kDefaultIouThreshold;

    void validate() const
    {
        if (queue_capacity < 1) throw Error(ErrorKind::Config, "queue capacity must be >= 1");
        if (!(conf_threshold >= 0 && conf_threshold <= 1)) throw Error(ErrorKind::Config, "conf threshold outside [0,1]");
        if (!(iou_threshold >= 0 && iou_threshold <= 1)) throw Error(ErrorKind::Config, "iou threshold outside [0,1]");
        arbiter.validate();
    }
};

/// Confidence filter then per-class NMS; both are idempotent on backend output.
inline std::vector<Detection> postfilter(std::vector<Detection> dets, double conf_threshold, double iou_threshold)
{
    std::erase_if(dets, [&](const Detection& d) { return d.confidence < conf_threshold; });
    return nms(std::move(dets), iou_threshold, false);
}

// ---- the loop --------------------------------------------------------------

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_between(Clock::time_point a, Clock::time_point b)
{
    return std::chrono::duration<double, std::milli>(b - a).count();
}

struct Staged {
    Frame frame;
    Clock::time_point started;
    double capture_ms = 0;
};

template <class R>
struct Inferred {
    Staged staged;
    R result;
    double inference_ms = 0;
    std::int64_t lag = 0;
};

struct ConsumeTimings {
    double arbitrate_ms = 0;
    double speak_ms = 0;
};

inline void enqueue_logged(SpeechSink& sink, Utterance u, const LogFn& log)
{
    try {
        if (!sink.enqueue(u)) log("speech queue full; dropped \"" + u.text + "\"");
    } catch (const Error& e) {
        log(std::string("speech sink: ") + e.what());
    }
}

template <class R>
void record(Metrics& m, const Inferred<R>& item, const ConsumeTimings& t, Clock::time_point done)
{
    const double e2e = ms_between(item.staged.started, done);
    m.capture_ms.push_back(item.staged.capture_ms);
    m.inference_ms.push_back(item.inference_ms);
    m.arbitrate_ms.push_back(t.arbitrate_ms);
    m.speak_ms.push_back(t.speak_ms);
    m.end_to_end_ms.push_back(e2e);
    m.overhead_ms.push_back(std::max(0.0, e2e - item.inference_ms));
    m.processed_indices.push_back(item.staged.frame.index);
    m.dispatch_lag.push_back(item.lag);
    m.max_dispatch_lag = std::max(m.max_dispatch_lag, item.lag);
    ++m.processed;
}

/// Source -> inference -> consumer. Metrics are written by the consumer
/// (the calling thread) only; counts from the producer are read after join.
template <class R, class Infer, class Consume>
Metrics run_loop(const PipelineConfig& cfg, FrameSource& source, SpeechSink& sink, const std::atomic<bool>* stop,
                 Infer infer, Consume consume)
{
    cfg.validate();
    Metrics m;
    auto stop_requested = [stop] { return stop && stop->load(std::memory_order_relaxed); };

    auto capture = [&]() -> std::optional<Staged> {
        const auto t0 = Clock::now();
        auto frame = source.next();
        if (!frame) return std::nullopt;
        return Staged{std::move(*frame), t0, ms_between(t0, Clock::now())};
    };

    auto settle = [&] {
        if (cfg.pacing == Pacing::Simulated) sink.wait_idle();
    };

    if (cfg.execution == Execution::Reference) {
        while (!stop_requested()) {
            auto staged = capture();
            if (!staged) break;
            ++m.sourced;
            const auto t = Clock::now();
            R result = infer(staged->frame);
            Inferred<R> item{std::move(*staged), std::move(result), ms_between(t, Clock::now()), 0};
            const auto timings = consume(item);
            record(m, item, timings, Clock::now());
            sink.wait_idle();
        }
        return m;
    }

    sink.start();
    const Overflow policy = cfg.pacing == Pacing::Live ? Overflow::DropOldest : Overflow::Block;
    BoundedQueue<Staged> staged_q(cfg.queue_capacity, policy);
    BoundedQueue<Inferred<R>> inferred_q(cfg.queue_capacity, Overflow::Block);
    std::atomic<std::int64_t> newest{-1};
    std::atomic<std::size_t> sourced{0}, dropped{0};
    std::atomic<bool> aborted{false};
    std::exception_ptr failure;

    std::thread producer([&] {
        const auto start = Clock::now();
        const auto period = std::chrono::duration<double>(source.period());
        std::int64_t n = 0;
        try {
            while (!stop_requested() && !aborted.load()) {
                auto staged = capture();
                if (!staged) break;
                newest.store(staged->frame.index);
                sourced.fetch_add(1);
                dropped.fetch_add(staged_q.push(std::move(*staged)));
                ++n;
                if (cfg.pacing == Pacing::Live) {
                    std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(period * n));
                }
            }
        } catch (...) {
            if (!aborted.exchange(true)) failure = std::current_exception();
        }
        staged_q.close();
    });

    std::thread worker([&] {
        while (auto staged = staged_q.pop()) {
            if (stop_requested()) {
                dropped.fetch_add(1 + staged_q.discard());
                break;
            }
            const std::int64_t lag = newest.load() - staged->frame.index;
            const auto t = Clock::now();
            Inferred<R> item{std::move(*staged), {}, 0, lag};
            try {
                item.result = infer(item.staged.frame);
            } catch (...) {
                if (!aborted.exchange(true)) failure = std::current_exception();
                staged_q.discard();
                break;
            }
            item.inference_ms = ms_between(t, Clock::now());
            inferred_q.push(std::move(item));
        }
        inferred_q.close();
    });

    while (auto item = inferred_q.pop()) {
        const auto timings = consume(*item);
        record(m, *item, timings, Clock::now());
        settle();
    }
    worker.join();
    producer.join();
    if (failure) std::rethrow_exception(failure);
    m.sourced = sourced.load();
    m.dropped = dropped.load();
    return m;
}

}  // namespace detail

/// detect -> arbitrate -> phrase -> enqueue for every frame that survives staging.
inline Metrics run_detection_mode(const PipelineConfig& cfg, FrameSource& source, Detector& detector,
                                  SpeechSink& sink, const std::atomic<bool>* stop = nullptr,
                                  LogFn log = stderr_logger())
{
    using R = std::vector<Detection>;
    ArbiterState state;
    auto infer = [&](const Frame& frame) {
        return postfilter(detector.detect(frame), cfg.conf_threshold, cfg.iou_threshold);
    };
    auto consume = [&](const detail::Inferred<R>& item) {
        detail::ConsumeTimings t;
        const auto& frame = item.staged.frame;
        auto t0 = detail::Clock::now();
        arbitrate(item.result, {}, state, cfg.arbiter, cfg.labels, {frame.image.width(), frame.image.height()},
                  frame.timestamp, frame.index);
        std::vector<Utterance> utterances;
        for (const auto& ev : state.drain()) {
            utterances.push_back({phrase(ev), ev.kind == EventKind::Hazard ? Priority::Hazard : Priority::Normal,
                                  ev.timestamp});
        }
        auto t1 = detail::Clock::now();
        for (auto& u : utterances) detail::enqueue_logged(sink, std::move(u), log);
        t.arbitrate_ms = detail::ms_between(t0, t1);
        t.speak_ms = detail::ms_between(t1, detail::Clock::now());
        return t;
    };
    return detail::run_loop<R>(cfg, source, sink, stop, infer, consume);
}

/// recognize -> one "reading: ..." utterance per text block, no debouncing.
inline Metrics run_reader_mode(const PipelineConfig& cfg, FrameSource& source, TextReader& reader, SpeechSink& sink,
                               const std::atomic<bool>* stop = nullptr, LogFn log = stderr_logger())
{
    using R = std::vector<TextBlock>;
    auto infer = [&](const Frame& frame) { return reader.read(frame); };
    auto consume = [&](const detail::Inferred<R>& item) {
        detail::ConsumeTimings t;
        const auto& frame = item.staged.frame;
        auto t0 = detail::Clock::now();
        std::vector<Utterance> utterances;
        for (const auto& block : item.result) {
            if (block.text.empty()) continue;
            AnnouncementEvent ev{EventKind::Text, block.text, Zone::Center, Proximity::Near, block.confidence,
                                 frame.index, frame.timestamp};
            utterances.push_back({phrase(ev), Priority::Normal, frame.timestamp});
        }
        auto t1 = detail::Clock::now();
        for (auto& u : utterances) detail::enqueue_logged(sink, std::move(u), log);
        t.arbitrate_ms = detail::ms_between(t0, t1);
        t.speak_ms = detail::ms_between(t1, detail::Clock::now());
        return t;
    };
    return detail::run_loop<R>(cfg, source, sink, stop, infer, consume);
}

}  // namespace audioaid

#pragma once

// Command-line front end: detect, read, run, bench. run_cli is the whole
// program; tools/audioaid.cpp only wires stdout, stderr and SIGINT to it.

#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "audioaid/arbiter.hpp"
#include "audioaid/detection.hpp"
#include "audioaid/detector.hpp"
#include "audioaid/error.hpp"
#include "audioaid/labels.hpp"
#include "audioaid/metrics.hpp"
#include "audioaid/ocr.hpp"
#include "audioaid/pipeline.hpp"
#include "audioaid/pnm.hpp"
#include "audioaid/speech.hpp"

namespace audioaid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitBackend = 3;

/// Every flag with its default. Config-file keys are the flag names without dashes.
struct CliOptions {
    std::string mode = "detect";
    std::string image;
    std::string source_dir;
    double frame_period_ms = 100;
    std::string config;
    std::string backend = "scripted";
    std::string backend_cmd;
    std::string script;
    double conf_threshold = kDefaultConfThreshold;
    double iou_threshold = kDefaultIouThreshold;
    bool denoise = false;
    bool ocr_adaptive = false;
    bool speak = false;
    std::string sink_cmd = "espeak {text}";
    std::string transcript;
    std::string metrics;
    std::string labels;
    bool realtime = false;
};

namespace detail {

struct Binding {
    std::string key;
    CLI::Option* option = nullptr;
    std::function<void(const nlohmann::json&)> assign;
};

template <class T>
Binding bind_option(CLI::App& app, const std::string& key, T& field, const std::string& help)
{
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<T, bool>) {
        opt = app.add_flag("--" + key, field, help);
    } else {
        opt = app.add_option("--" + key, field, help);
    }
    return {key, opt, [&field, key](const nlohmann::json& v) {
                try {
                    field = v.get<T>();
                } catch (const nlohmann::json::exception&) {
                    throw Error(ErrorKind::Config, "config key '" + key + "' has the wrong type");
                }
            }};
}

/// Fills every option not given on the command line from the JSON file;
/// returns the keys the file mentions.
inline std::vector<std::string> apply_config_file(const std::string& path, const std::vector<Binding>& bindings)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "config " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
    std::vector<std::string> keys;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        auto b = std::find_if(bindings.begin(), bindings.end(), [&](const Binding& x) { return x.key == it.key(); });
        if (b == bindings.end() || b->key == "config") throw Error(ErrorKind::Config, "unknown config key: " + it.key());
        if (b->option->count() == 0) b->assign(it.value());
        keys.push_back(it.key());
    }
    return keys;
}

inline bool given(const std::vector<Binding>& bindings, const std::string& key)
{
    for (const auto& b : bindings) {
        if (b.key == key && b.option->count() > 0) return true;
    }
    return false;
}

struct Context {
    CliOptions opts;
    std::vector<Binding> bindings;
    std::ostream& out;
    std::ostream& err;
    const std::atomic<bool>* stop;
    LabelTable labels = LabelTable::defaults();
    std::vector<std::string> from_file;  // keys set by the config file

    bool set(const std::string& key) const
    {
        return given(bindings, key) || std::find(from_file.begin(), from_file.end(), key) != from_file.end();
    }

    void warn(const std::string& message) const { err << "warning: " << message << '\n'; }

    LogFn logger() const
    {
        return [this](const std::string& m) { err << "audioaid: " << m << '\n'; };
    }
};

inline Mode parse_mode(const std::string& mode)
{
    if (mode == "detect") return Mode::Detect;
    if (mode == "read") return Mode::Read;
    throw Error(ErrorKind::Config, "--mode must be detect or read, got '" + mode + "'");
}

inline void warn_ignored(const Context& ctx, Mode mode)
{
    const char* ocr_keys[] = {"denoise", "ocr-adaptive"};
    const char* det_keys[] = {"script", "conf-threshold", "iou-threshold", "labels"};
    if (mode == Mode::Detect) {
        for (const char* k : ocr_keys) {
            if (ctx.set(k)) ctx.warn(std::string("--") + k + " ignored in detect mode");
        }
    } else {
        for (const char* k : det_keys) {
            if (ctx.set(k)) ctx.warn(std::string("--") + k + " ignored in read mode");
        }
    }
}

inline OcrConfig ocr_config(const CliOptions& o)
{
    OcrConfig cfg;
    cfg.denoise = o.denoise;
    cfg.adaptive = o.ocr_adaptive;
    return cfg;
}

inline std::unique_ptr<Detector> make_detector(const Context& ctx)
{
    const auto& o = ctx.opts;
    if (o.backend == "scripted") {
        ScriptedDetector::Script script;
        if (!o.script.empty()) script = ScriptedDetector::load_script(o.script, ctx.labels);
        return std::make_unique<ScriptedDetector>(std::move(script));
    }
    if (o.backend == "external") {
        if (o.backend_cmd.empty()) throw Error(ErrorKind::Config, "--backend external needs --backend-cmd");
        return std::make_unique<ExternalProcessDetector>(ExternalDetectorConfig{o.backend_cmd}, ctx.labels);
    }
    throw Error(ErrorKind::Config, "--backend must be scripted or external, got '" + o.backend + "'");
}

inline std::unique_ptr<TextReader> make_reader(const Context& ctx)
{
    const auto& o = ctx.opts;
    if (o.backend == "scripted") return std::make_unique<TemplateTextReader>(ocr_config(o));
    if (o.backend == "external") {
        if (o.backend_cmd.empty()) throw Error(ErrorKind::Config, "--backend external needs --backend-cmd");
        return std::make_unique<ExternalTextReader>(OcrEngineConfig{o.backend_cmd});
    }
    throw Error(ErrorKind::Config, "--backend must be scripted or external, got '" + o.backend + "'");
}

/// Transcript file and/or speech engine; `fallback` is used when neither is configured.
inline std::unique_ptr<SpeechSink> make_sink(const Context& ctx, std::unique_ptr<Voice> fallback)
{
    std::vector<std::unique_ptr<Voice>> voices;
    if (!ctx.opts.transcript.empty()) voices.push_back(std::make_unique<TranscriptVoice>(ctx.opts.transcript));
    if (ctx.opts.speak) {
        voices.push_back(std::make_unique<EngineVoice>(ctx.opts.sink_cmd, std::chrono::milliseconds(5000),
                                                       ctx.logger()));
    }
    if (voices.empty() && fallback) voices.push_back(std::move(fallback));
    return std::make_unique<SpeechSink>(std::move(voices), SpeechOptions{}, ctx.logger());
}

inline Raster load_image(const CliOptions& o)
{
    if (o.image.empty()) throw Error(ErrorKind::InvalidInput, "--image is required");
    return pnm::read(o.image);
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
    f << text;
}

inline int cmd_detect(Context& ctx)
{
    if (ctx.set("mode") && ctx.opts.mode != "detect") ctx.warn("--mode ignored by the detect command");
    warn_ignored(ctx, Mode::Detect);
    Frame frame{load_image(ctx.opts), 0, 0, ctx.opts.image};
    auto detector = make_detector(ctx);
    auto dets = postfilter(detector->detect(frame), ctx.opts.conf_threshold, ctx.opts.iou_threshold);
    for (const auto& d : dets) ctx.out << to_record(d).dump() << '\n';

    ArbiterState state;
    auto events = arbitrate(dets, {}, state, {}, ctx.labels, {frame.image.width(), frame.image.height()}, 0, 0);
    auto sink = make_sink(ctx, nullptr);
    for (const auto& ev : events) {
        ctx.out << phrase(ev) << '\n';
        sink->enqueue({phrase(ev), ev.kind == EventKind::Hazard ? Priority::Hazard : Priority::Normal, 0});
    }
    sink->close();
    return kExitOk;
}

inline int cmd_read(Context& ctx)
{
    if (ctx.set("mode") && ctx.opts.mode != "read") ctx.warn("--mode ignored by the read command");
    warn_ignored(ctx, Mode::Read);
    Frame frame{load_image(ctx.opts), 0, 0, ctx.opts.image};
    auto reader = make_reader(ctx);
    auto blocks = reader->read(frame);
    auto sink = make_sink(ctx, nullptr);
    for (const auto& b : blocks) {
        if (b.text.empty()) continue;
        ctx.out << b.text << '\n';
        if (ctx.opts.speak || !ctx.opts.transcript.empty()) sink->enqueue({"reading: " + b.text, Priority::Normal, 0});
    }
    sink->close();
    return kExitOk;
}

inline PipelineConfig pipeline_config(const Context& ctx, Mode mode)
{
    PipelineConfig cfg;
    cfg.mode = mode;
    cfg.pacing = ctx.opts.realtime ? Pacing::Live : Pacing::Simulated;
    cfg.labels = ctx.labels;
    cfg.conf_threshold = ctx.opts.conf_threshold;
    cfg.iou_threshold = ctx.opts.iou_threshold;
    cfg.validate();
    return cfg;
}

inline Metrics run_mode(Context& ctx, Mode mode, FrameSource& source, SpeechSink& sink)
{
    const auto cfg = pipeline_config(ctx, mode);
    if (mode == Mode::Detect) {
        auto detector = make_detector(ctx);
        return run_detection_mode(cfg, source, *detector, sink, ctx.stop, ctx.logger());
    }
    auto reader = make_reader(ctx);
    return run_reader_mode(cfg, source, *reader, sink, ctx.stop, ctx.logger());
}

inline int cmd_run(Context& ctx)
{
    const Mode mode = parse_mode(ctx.opts.mode);
    warn_ignored(ctx, mode);
    if (!(ctx.opts.frame_period_ms >= 0)) throw Error(ErrorKind::Config, "--frame-period-ms must be >= 0");
    std::vector<std::filesystem::path> files;
    if (!ctx.opts.source_dir.empty()) {
        if (!ctx.opts.image.empty()) ctx.warn("--image ignored when --source-dir is given");
        files = FileSource::list_directory(ctx.opts.source_dir);
    } else if (!ctx.opts.image.empty()) {
        if (!std::filesystem::is_regular_file(ctx.opts.image)) {
            throw Error(ErrorKind::InvalidInput, "no such image: " + ctx.opts.image);
        }
        files.push_back(ctx.opts.image);
    } else {
        throw Error(ErrorKind::InvalidInput, "run needs --source-dir or --image");
    }
    FileSource source(std::move(files), ctx.opts.frame_period_ms / 1000.0);
    auto sink = make_sink(ctx, std::make_unique<StreamVoice>(ctx.out));
    const Metrics m = run_mode(ctx, mode, source, *sink);
    sink->close();
    if (!ctx.opts.metrics.empty()) write_text(ctx.opts.metrics, metrics_report(m));
    return kExitOk;
}

inline int cmd_bench(Context& ctx)
{
    const Mode mode = parse_mode(ctx.opts.mode);
    warn_ignored(ctx, mode);
    if (ctx.opts.source_dir.empty()) throw Error(ErrorKind::InvalidInput, "bench needs --source-dir");
    FileSource source(FileSource::list_directory(ctx.opts.source_dir), ctx.opts.frame_period_ms / 1000.0);
    auto sink = make_sink(ctx, nullptr);
    const Metrics m = run_mode(ctx, mode, source, *sink);
    sink->close();
    const std::string report = metrics_report(m);
    ctx.out << report;
    if (!ctx.opts.metrics.empty()) write_text(ctx.opts.metrics, report);
    return kExitOk;
}

}  // namespace detail

inline int exit_code_for(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::BackendUnavailable:
    case ErrorKind::EngineUnavailable: return kExitBackend;
    default: return kExitInput;
    }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                   const std::atomic<bool>* stop = nullptr)
{
    detail::Context ctx{CliOptions{}, {}, out, err, stop, LabelTable::defaults(), {}};
    auto& o = ctx.opts;

    CLI::App app{"Scene-to-audio assistant: object announcements and text reading"};
    app.name("audioaid");
    app.fallthrough();
    app.require_subcommand(1, 1);

    auto& b = ctx.bindings;
    b.push_back(detail::bind_option(app, "mode", o.mode, "detect or read (run, bench)"));
    b.push_back(detail::bind_option(app, "image", o.image, "input PGM/PPM image"));
    b.push_back(detail::bind_option(app, "source-dir", o.source_dir, "directory of PGM/PPM frames, filename order"));
    b.push_back(detail::bind_option(app, "frame-period-ms", o.frame_period_ms, "frame period in milliseconds"));
    b.push_back(detail::bind_option(app, "config", o.config, "JSON file of flag defaults"));
    b.push_back(detail::bind_option(app, "backend", o.backend, "scripted or external"));
    b.push_back(detail::bind_option(app, "backend-cmd", o.backend_cmd, "external detector / OCR command"));
    b.push_back(detail::bind_option(app, "script", o.script, "scripted detector JSON"));
    b.push_back(detail::bind_option(app, "conf-threshold", o.conf_threshold, "minimum detection confidence"));
    b.push_back(detail::bind_option(app, "iou-threshold", o.iou_threshold, "NMS IoU threshold"));
    b.push_back(detail::bind_option(app, "denoise", o.denoise, "median filter before OCR"));
    b.push_back(detail::bind_option(app, "ocr-adaptive", o.ocr_adaptive, "adaptive threshold for OCR"));
    b.push_back(detail::bind_option(app, "speak", o.speak, "speak through --sink-cmd"));
    b.push_back(detail::bind_option(app, "sink-cmd", o.sink_cmd, "speech command containing {text}"));
    b.push_back(detail::bind_option(app, "transcript", o.transcript, "transcript output path"));
    b.push_back(detail::bind_option(app, "metrics", o.metrics, "metrics report output path"));
    b.push_back(detail::bind_option(app, "labels", o.labels, "label table file"));
    b.push_back(detail::bind_option(app, "realtime", o.realtime, "pace frames on the wall clock, dropping stale ones"));

    auto* detect = app.add_subcommand("detect", "detect objects in one image");
    auto* read = app.add_subcommand("read", "read printed text in one image");
    auto* run = app.add_subcommand("run", "run the pipeline over a frame source");
    auto* bench = app.add_subcommand("bench", "run a corpus and print the metrics report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (!o.config.empty()) ctx.from_file = detail::apply_config_file(o.config, ctx.bindings);
        if (!o.labels.empty()) ctx.labels = LabelTable::load(o.labels);

        if (detect->parsed()) return detail::cmd_detect(ctx);
        if (read->parsed()) return detail::cmd_read(ctx);
        if (run->parsed()) return detail::cmd_run(ctx);
        if (bench->parsed()) return detail::cmd_bench(ctx);
        return kExitInput;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

}  // namespace audioaid

#pragma once

// Detector backends. The network lives outside the process: the library
// ships a scripted backend for tests and a newline-delimited JSON adapter
// for an external inference process.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "audioaid/detection.hpp"
#include "audioaid/error.hpp"
#include "audioaid/frame.hpp"
#include "audioaid/labels.hpp"
#include "audioaid/pnm.hpp"
#include "audioaid/process.hpp"

namespace audioaid {

class Detector {
public:
    virtual ~Detector() = default;

    /// Detections in source-frame pixels, already filtered and suppressed.
    virtual std::vector<Detection> detect(const Frame& frame) = 0;
};

/// Wire record: {"x1","y1","x2","y2","class_id","confidence"} in that order.
inline nlohmann::ordered_json to_record(const Detection& det)
{
    nlohmann::ordered_json rec;
    rec["x1"] = det.box.x1;
    rec["y1"] = det.box.y1;
    rec["x2"] = det.box.x2;
    rec["y2"] = det.box.y2;
    rec["class_id"] = det.class_id;
    rec["confidence"] = det.confidence;
    return rec;
}

inline Detection from_record(const nlohmann::json& rec, const LabelTable& labels)
{
    if (!rec.is_object()) throw Error(ErrorKind::InvalidInput, "detection record must be an object");
    auto number = [&](const char* key) {
        auto it = rec.find(key);
        if (it == rec.end() || !it->is_number()) {
            throw Error(ErrorKind::InvalidInput, std::string("detection record missing numeric '") + key + "'");
        }
        return it->get<double>();
    };
    Detection det;
    det.box = {number("x1"), number("y1"), number("x2"), number("y2")};
    auto id = rec.find("class_id");
    if (id == rec.end() || !id->is_number_integer()) {
        throw Error(ErrorKind::InvalidInput, "detection record missing integer 'class_id'");
    }
    det.class_id = id->get<int>();
    det.confidence = number("confidence");
    if (!labels.contains(det.class_id)) {
        throw Error(ErrorKind::InvalidInput, "class_id " + std::to_string(det.class_id) + " not in label table");
    }
    if (det.confidence < 0 || det.confidence > 1) throw Error(ErrorKind::InvalidInput, "confidence outside [0,1]");
    if (det.box.x1 > det.box.x2 || det.box.y1 > det.box.y2) throw Error(ErrorKind::InvalidInput, "inverted box");
    det.class_name = labels.name(det.class_id);
    return det;
}

/// Replays a fixed frame-index -> detections script. Optional per-call delay
/// stands in for inference time.
class ScriptedDetector : public Detector {
public:
    using Script = std::map<std::int64_t, std::vector<Detection>>;

    explicit ScriptedDetector(Script script = {}, std::chrono::microseconds delay = {})
        : script_(std::move(script)), delay_(delay)
    {
    }

    /// JSON object mapping frame index strings to arrays of wire records.
    static Script parse_script(const nlohmann::json& doc, const LabelTable& labels)
    {
        if (!doc.is_object()) throw Error(ErrorKind::InvalidInput, "detector script must be a JSON object");
        Script script;
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            std::int64_t index = 0;
            try {
                std::size_t used = 0;
                index = std::stoll(it.key(), &used);
                if (used != it.key().size()) throw std::invalid_argument(it.key());
            } catch (const std::exception&) {
                throw Error(ErrorKind::InvalidInput, "script key is not a frame index: " + it.key());
            }
            if (!it.value().is_array()) throw Error(ErrorKind::InvalidInput, "script entry must be an array");
            auto& dets = script[index];
            for (const auto& rec : it.value()) dets.push_back(from_record(rec, labels));
        }
        return script;
    }

    static Script load_script(const std::filesystem::path& path, const LabelTable& labels)
    {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::Io, "cannot open script " + path.string());
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidInput, "script " + path.string() + ": " + e.what());
        }
        return parse_script(doc, labels);
    }

    std::vector<Detection> detect(const Frame& frame) override
    {
        calls_.fetch_add(1, std::memory_order_relaxed);
        if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
        auto it = script_.find(frame.index);
        return it == script_.end() ? std::vector<Detection>{} : it->second;
    }

    std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

private:
    Script script_;
    std::chrono::microseconds delay_;
    std::atomic<std::size_t> calls_{0};
};

struct ExternalDetectorConfig {
    std::string command;
    int model_size = 640;
    std::chrono::milliseconds timeout{2000};
};

/// Long-lived child process speaking one JSON request/response line per frame.
class ExternalProcessDetector : public Detector {
public:
    ExternalProcessDetector(ExternalDetectorConfig cfg, LabelTable labels = LabelTable::defaults())
        : cfg_(std::move(cfg)), labels_(std::move(labels))
    {
        auto argv = process::split_command(cfg_.command);
        if (argv.empty()) throw Error(ErrorKind::Config, "external detector command is empty");
        try {
            child_ = process::Child::spawn(argv, true, true);
        } catch (const process::SpawnFailure& e) {
            throw Error(ErrorKind::BackendUnavailable, e.what());
        }
    }

    ~ExternalProcessDetector() override
    {
        child_.close_stdin();
        if (!child_.wait_until(process::Clock::now() + std::chrono::milliseconds(200))) child_.terminate();
        std::error_code ec;
        if (!scratch_.empty()) std::filesystem::remove_all(scratch_, ec);
    }

    /// The exact request line written for a frame, newline included.
    static std::string request_line(std::int64_t id, const std::string& image_path, int model_size)
    {
        return "{\"id\": " + std::to_string(id) + ", \"image\": " + nlohmann::json(image_path).dump() +
               ", \"model_size\": " + std::to_string(model_size) + "}\n";
    }

    std::vector<Detection> detect(const Frame& frame) override
    {
        if (dead_) throw Error(ErrorKind::BackendUnavailable, "detector process is gone");
        const std::int64_t id = frame.index;
        const std::string path = image_path_for(frame);
        if (!child_.write_all(request_line(id, path, cfg_.model_size))) {
            fail("cannot write request to detector process");
        }
        std::string line;
        switch (child_.read_line(line, process::Clock::now() + cfg_.timeout)) {
        case process::ReadStatus::Line: break;
        case process::ReadStatus::Timeout: fail("detector response timed out");
        case process::ReadStatus::Eof: fail("detector process closed its output");
        }
        return parse_response(line, id);
    }

    std::vector<Detection> parse_response(const std::string& line, std::int64_t expected_id)
    {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(std::string("malformed detector response: ") + e.what());
        }
        if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_number_integer() ||
            doc["id"].get<std::int64_t>() != expected_id) {
            fail("detector response id does not echo request " + std::to_string(expected_id));
        }
        if (!doc.contains("detections") || !doc["detections"].is_array()) {
            fail("detector response has no detections array");
        }
        std::vector<Detection> out;
        try {
            for (const auto& rec : doc["detections"]) out.push_back(from_record(rec, labels_));
        } catch (const Error& e) {
            fail(e.what());
        }
        return out;
    }

private:
    [[noreturn]] void fail(const std::string& why)
    {
        dead_ = true;
        child_.terminate();
        throw Error(ErrorKind::BackendUnavailable, why);
    }

    std::string image_path_for(const Frame& frame)
    {
        if (!frame.path.empty()) return frame.path.string();
        if (scratch_.empty()) {
            scratch_ = std::filesystem::temp_directory_path() /
                       ("audioaid-detector-" + std::to_string(child_.pid()));
            std::filesystem::create_directories(scratch_);
        }
        auto path = scratch_ / (frame.image.channels() == 1 ? "frame.pgm" : "frame.ppm");
        pnm::write(path, frame.image);
        return path.string();
    }

    ExternalDetectorConfig cfg_;
    LabelTable labels_;
    process::Child child_;
    bool dead_ = false;
    std::filesystem::path scratch_;
};

}  // namespace audioaid

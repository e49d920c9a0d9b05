#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "audioaid/error.hpp"

namespace audioaid {

/// Ordered class names with a hazard flag per class; class_id indexes the table.
class LabelTable {
public:
    struct Entry {
        std::string name;
        bool hazard = false;
    };

    LabelTable() = default;

    explicit LabelTable(std::vector<Entry> entries) : entries_(std::move(entries))
    {
        std::unordered_set<std::string_view> seen;
        for (const auto& e : entries_) {
            if (e.name.empty()) throw Error(ErrorKind::Config, "empty class name in label table");
            if (!seen.insert(e.name).second) throw Error(ErrorKind::Config, "duplicate class name: " + e.name);
        }
    }

    /// The 80 COCO classes followed by the assistive hazard classes.
    static const LabelTable& defaults()
    {
        static const LabelTable table = [] {
            static constexpr const char* kCoco[] = {
                "person",        "bicycle",      "car",           "motorcycle",    "airplane",
                "bus",           "train",        "truck",         "boat",          "traffic light",
                "fire hydrant",  "stop sign",    "parking meter", "bench",         "bird",
                "cat",           "dog",          "horse",         "sheep",         "cow",
                "elephant",      "bear",         "zebra",         "giraffe",       "backpack",
                "umbrella",      "handbag",      "tie",           "suitcase",      "frisbee",
                "skis",          "snowboard",    "sports ball",   "kite",          "baseball bat",
                "baseball glove", "skateboard",  "surfboard",     "tennis racket", "bottle",
                "wine glass",    "cup",          "fork",          "knife",         "spoon",
                "bowl",          "banana",       "apple",         "sandwich",      "orange",
                "broccoli",      "carrot",       "hot dog",       "pizza",         "donut",
                "cake",          "chair",        "couch",         "potted plant",  "bed",
                "dining table",  "toilet",       "tv",            "laptop",        "mouse",
                "remote",        "keyboard",     "cell phone",    "microwave",     "oven",
                "toaster",       "sink",         "refrigerator",  "book",          "clock",
                "vase",          "scissors",     "teddy bear",    "hair drier",    "toothbrush",
            };
            static constexpr const char* kHazards[] = {"stairs", "hole", "sewage water", "garbage", "ladder"};
            std::vector<Entry> entries;
            for (const char* name : kCoco) entries.push_back({name, false});
            for (const char* name : kHazards) entries.push_back({name, true});
            return LabelTable(std::move(entries));
        }();
        return table;
    }

    /// One class per line; a line "name<TAB>hazard" sets the hazard flag.
    /// Blank lines and lines starting with '#' are skipped.
    static LabelTable parse(std::string_view text)
    {
        std::vector<Entry> entries;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(pos, end - pos);
            pos = end + 1;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty() || line.front() == '#') continue;
            Entry entry;
            if (auto tab = line.find('\t'); tab != std::string_view::npos) {
                const auto flag = line.substr(tab + 1);
                if (flag != "hazard") throw Error(ErrorKind::Config, "unknown label flag: " + std::string(flag));
                entry.hazard = true;
                line = line.substr(0, tab);
            }
            entry.name = std::string(line);
            entries.push_back(std::move(entry));
        }
        if (entries.empty()) throw Error(ErrorKind::Config, "label table is empty");
        return LabelTable(std::move(entries));
    }

    static LabelTable load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::Io, "cannot open label file " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(text);
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(int class_id) const noexcept
    {
        return class_id >= 0 && static_cast<std::size_t>(class_id) < entries_.size();
    }
    const std::string& name(int class_id) const { return entries_.at(static_cast<std::size_t>(class_id)).name; }
    bool is_hazard(int class_id) const { return entries_.at(static_cast<std::size_t>(class_id)).hazard; }

    bool is_hazard_name(std::string_view name) const
    {
        auto id = find(name);
        return id && entries_[static_cast<std::size_t>(*id)].hazard;
    }

    std::optional<int> find(std::string_view name) const
    {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].name == name) return static_cast<int>(i);
        }
        return std::nullopt;
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }

private:
    std::vector<Entry> entries_;
};

}  // namespace audioaid

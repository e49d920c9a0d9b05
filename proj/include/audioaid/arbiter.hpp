#pragma once

// Announcement policy: turns per-frame detections and text blocks into a
// short, hazard-first, debounced list of things worth saying.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "audioaid/detection.hpp"
#include "audioaid/error.hpp"
#include "audioaid/labels.hpp"
#include "audioaid/ocr.hpp"

namespace audioaid {

enum class EventKind { Hazard, Object, Text };
enum class Zone { Left, Center, Right };
enum class Proximity { Near, Mid, Far };

inline const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::Hazard: return "hazard";
    case EventKind::Object: return "object";
    case EventKind::Text: return "text";
    }
    return "?";
}

inline const char* to_string(Zone z)
{
    switch (z) {
    case Zone::Left: return "left";
    case Zone::Center: return "center";
    case Zone::Right: return "right";
    }
    return "?";
}

inline const char* to_string(Proximity p)
{
    switch (p) {
    case Proximity::Near: return "near";
    case Proximity::Mid: return "mid";
    case Proximity::Far: return "far";
    }
    return "?";
}

struct AnnouncementEvent {
    EventKind kind = EventKind::Object;
    std::string label;
    Zone zone = Zone::Center;
    Proximity proximity = Proximity::Near;
    double confidence = 0;
    std::int64_t frame_index = 0;
    double timestamp = 0;

    friend bool operator==(const AnnouncementEvent&, const AnnouncementEvent&) = default;
};

struct ArbiterConfig {
    double debounce_window = 3.0;  // seconds
    std::size_t max_per_frame = 2;  // non-hazard events; hazards are exempt
    std::size_t max_pending = 16;
    double near_ratio = 0.25;
    double mid_ratio = 0.05;

    void validate() const
    {
        if (!(debounce_window > 0)) throw Error(ErrorKind::Config, "debounce window must be > 0");
        if (!(near_ratio > mid_ratio) || !(mid_ratio >= 0)) {
            throw Error(ErrorKind::Config, "proximity thresholds must be descending");
        }
    }
};

inline Zone zone_of(const Box& box, double frame_w)
{
    const double cx = box.center_x();
    if (cx < frame_w / 3) return Zone::Left;
    if (cx <= 2 * frame_w / 3) return Zone::Center;
    return Zone::Right;
}

inline Proximity proximity_of(const Box& box, double frame_w, double frame_h, const ArbiterConfig& cfg = {})
{
    const double ratio = box.area() / (frame_w * frame_h);
    if (ratio >= cfg.near_ratio) return Proximity::Near;
    if (ratio >= cfg.mid_ratio) return Proximity::Mid;
    return Proximity::Far;
}

/// Debounce memory plus the bounded hand-off queue toward speech.
struct ArbiterState {
    std::map<std::pair<std::string, Zone>, double> last_announced;
    std::deque<AnnouncementEvent> pending;
    std::size_t dropped_pending = 0;

    /// Removes and returns everything pending, oldest first.
    std::vector<AnnouncementEvent> drain()
    {
        std::vector<AnnouncementEvent> out(pending.begin(), pending.end());
        pending.clear();
        return out;
    }

    friend bool operator==(const ArbiterState&, const ArbiterState&) = default;
};

struct FrameGeometry {
    int width = 1;
    int height = 1;
};

namespace detail {

inline void push_pending(ArbiterState& state, const AnnouncementEvent& ev, std::size_t max_pending)
{
    state.pending.push_back(ev);
    while (state.pending.size() > max_pending) {
        auto victim = std::find_if(state.pending.begin(), state.pending.end(),
                                   [](const AnnouncementEvent& e) { return e.kind != EventKind::Hazard; });
        if (victim == state.pending.end()) break;  // hazards are never dropped
        state.pending.erase(victim);
        ++state.dropped_pending;
    }
}

}  // namespace detail

/// Emits this frame's announcements in speaking order and records them in
/// the state: debounce map updated, events appended to the pending queue.
inline std::vector<AnnouncementEvent> arbitrate(const std::vector<Detection>& dets,
                                                const std::vector<TextBlock>& texts, ArbiterState& state,
                                                const ArbiterConfig& cfg, const LabelTable& labels,
                                                FrameGeometry frame, double clock, std::int64_t frame_index)
{
    if (dets.empty() && texts.empty()) return {};

    for (auto it = state.last_announced.begin(); it != state.last_announced.end();) {
        it = clock - it->second >= cfg.debounce_window ? state.last_announced.erase(it) : std::next(it);
    }

    std::vector<AnnouncementEvent> candidates;
    for (const auto& det : dets) {
        AnnouncementEvent ev;
        const bool hazard = labels.contains(det.class_id) ? labels.is_hazard(det.class_id)
                                                          : labels.is_hazard_name(det.class_name);
        ev.kind = hazard ? EventKind::Hazard : EventKind::Object;
        ev.label = det.class_name;
        ev.zone = zone_of(det.box, frame.width);
        ev.proximity = proximity_of(det.box, frame.width, frame.height, cfg);
        ev.confidence = det.confidence;
        ev.frame_index = frame_index;
        ev.timestamp = clock;
        auto last = state.last_announced.find({ev.label, ev.zone});
        if (last != state.last_announced.end() && clock - last->second < cfg.debounce_window) continue;
        candidates.push_back(std::move(ev));
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const AnnouncementEvent& a, const AnnouncementEvent& b) {
        return std::make_tuple(a.kind != EventKind::Hazard, a.proximity, -a.confidence, std::cref(a.label)) <
               std::make_tuple(b.kind != EventKind::Hazard, b.proximity, -b.confidence, std::cref(b.label));
    });

    std::vector<AnnouncementEvent> emitted;
    std::set<std::pair<std::string, Zone>> this_frame;
    std::size_t objects = 0;
    for (auto& ev : candidates) {
        if (!this_frame.insert({ev.label, ev.zone}).second) continue;
        if (ev.kind != EventKind::Hazard && objects++ >= cfg.max_per_frame) continue;
        state.last_announced[{ev.label, ev.zone}] = clock;
        emitted.push_back(std::move(ev));
    }

    for (const auto& block : texts) {
        if (block.text.empty()) continue;
        emitted.push_back({EventKind::Text, block.text, Zone::Center, Proximity::Near, block.confidence, frame_index,
                           clock});
    }

    for (const auto& ev : emitted) detail::push_pending(state, ev, cfg.max_pending);
    return emitted;
}

inline std::string phrase(const AnnouncementEvent& ev)
{
    switch (ev.kind) {
    case EventKind::Hazard:
        return "caution: " + ev.label + " ahead, " + to_string(ev.zone) + ", " + to_string(ev.proximity);
    case EventKind::Object: return ev.label + ", " + to_string(ev.zone);
    case EventKind::Text: return "reading: " + ev.label;
    }
    return ev.label;
}

}  // namespace audioaid

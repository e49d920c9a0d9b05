#pragma once

// Detection geometry and YOLO-family post-processing.

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "audioaid/error.hpp"
#include "audioaid/labels.hpp"

namespace audioaid {

inline constexpr double kDefaultConfThreshold = 0.25;
inline constexpr double kDefaultIouThreshold = 0.45;

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const noexcept { return x2 - x1; }
    double height() const noexcept { return y2 - y1; }
    double area() const noexcept { return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1); }
    double center_x() const noexcept { return (x1 + x2) / 2; }
    double center_y() const noexcept { return (y1 + y2) / 2; }

    friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
    Box box;
    int class_id = 0;
    std::string class_name;
    double confidence = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// One raw regression row of a YOLO-style output head, in model pixels.
struct CandidateRow {
    double cx = 0, cy = 0, w = 0, h = 0;
    double objectness = 0;
    std::vector<double> class_scores;
};

inline double iou(const Box& a, const Box& b) noexcept
{
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    const double inter = iw > 0 && ih > 0 ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

inline std::vector<Detection> decode_candidates(const std::vector<CandidateRow>& rows, double conf_threshold,
                                                const LabelTable& labels = LabelTable::defaults())
{
    std::vector<Detection> out;
    for (const auto& row : rows) {
        if (row.class_scores.empty()) throw Error(ErrorKind::InvalidInput, "candidate row has no class scores");
        // max_element returns the first maximum, which is the smallest-index tie rule.
        const auto best = std::max_element(row.class_scores.begin(), row.class_scores.end());
        const int class_id = static_cast<int>(best - row.class_scores.begin());
        const double confidence = row.objectness * *best;
        if (confidence < conf_threshold) continue;
        Detection det;
        det.box = {row.cx - row.w / 2, row.cy - row.h / 2, row.cx + row.w / 2, row.cy + row.h / 2};
        det.class_id = class_id;
        det.class_name = labels.contains(class_id) ? labels.name(class_id) : "class " + std::to_string(class_id);
        det.confidence = confidence;
        out.push_back(std::move(det));
    }
    return out;
}

/// Greedy suppression. Candidates are visited by confidence descending,
/// then lower class_id, lower x1, lower y1.
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, bool class_agnostic)
{
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        return std::make_tuple(-a.confidence, a.class_id, a.box.x1, a.box.y1) <
               std::make_tuple(-b.confidence, b.class_id, b.box.x1, b.box.y1);
    });
    std::vector<Detection> kept;
    for (auto& det : dets) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return (class_agnostic || k.class_id == det.class_id) && iou(k.box, det.box) > iou_threshold;
        });
        if (!suppressed) kept.push_back(std::move(det));
    }
    return kept;
}

/// Aspect-preserving resize into a square model input, padding split
/// floor on the leading edge and ceil on the trailing edge.
struct LetterboxTransform {
    double scale = 1;
    int pad_x = 0;
    int pad_y = 0;
    int scaled_w = 0;
    int scaled_h = 0;
    int model_size = 0;
    int src_w = 0;
    int src_h = 0;

    Box to_model(const Box& b) const noexcept
    {
        return {b.x1 * scale + pad_x, b.y1 * scale + pad_y, b.x2 * scale + pad_x, b.y2 * scale + pad_y};
    }
};

inline LetterboxTransform letterbox_transform(int src_w, int src_h, int model_size)
{
    if (src_w < 1 || src_h < 1 || model_size < 1) {
        throw Error(ErrorKind::InvalidParameter, "letterbox dimensions must be >= 1");
    }
    LetterboxTransform t;
    t.src_w = src_w;
    t.src_h = src_h;
    t.model_size = model_size;
    t.scale = std::min(static_cast<double>(model_size) / src_w, static_cast<double>(model_size) / src_h);
    auto scaled = [&](int dim) {
        return std::clamp(static_cast<int>(std::floor(dim * t.scale + 0.5)), 1, model_size);
    };
    t.scaled_w = scaled(src_w);
    t.scaled_h = scaled(src_h);
    t.pad_x = (model_size - t.scaled_w) / 2;
    t.pad_y = (model_size - t.scaled_h) / 2;
    return t;
}

inline Box map_to_source(const Box& box, const LetterboxTransform& t)
{
    auto fx = [&](double x) { return std::clamp((x - t.pad_x) / t.scale, 0.0, static_cast<double>(t.src_w)); };
    auto fy = [&](double y) { return std::clamp((y - t.pad_y) / t.scale, 0.0, static_cast<double>(t.src_h)); };
    return {fx(box.x1), fy(box.y1), fx(box.x2), fy(box.y2)};
}

}  // namespace audioaid

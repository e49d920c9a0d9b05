#pragma once

// Reader mode: binarize a page, segment it into lines of glyphs, and
// recognize each glyph by template matching against a 5x7 bitmap font.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "audioaid/detection.hpp"
#include "audioaid/error.hpp"
#include "audioaid/font.hpp"
#include "audioaid/frame.hpp"
#include "audioaid/imaging.hpp"
#include "audioaid/pnm.hpp"
#include "audioaid/process.hpp"

namespace audioaid {

struct OcrConfig {
    bool denoise = false;
    bool adaptive = false;
    int adaptive_window = 15;
    double adaptive_offset = 10;
    double reject_threshold = 0.7;
    long min_component_pixels = 3;
    int fallback_level = 127;
};

struct TextBlock {
    std::string text;
    Box box;
    double confidence = 0;

    friend bool operator==(const TextBlock&, const TextBlock&) = default;
};

/// A glyph is one or more components that share a character cell.
struct GlyphUnit {
    imaging::PixelBox box;
    std::vector<int> labels;
};

struct TextLine {
    std::vector<GlyphUnit> glyphs;  // left to right
    imaging::PixelBox box;
};

struct SegmentedPage {
    imaging::Labeling labeling;
    std::vector<TextLine> lines;  // top to bottom
};

struct GlyphMatch {
    char ch = '?';
    double score = 0;
};

namespace detail {

inline bool at_most_two_levels(const Raster& gray)
{
    const auto hist = imaging::histogram(gray);
    return std::count_if(hist.begin(), hist.end(), [](long n) { return n > 0; }) <= 2;
}

}  // namespace detail

inline Raster preprocess_for_ocr(const Raster& src, const OcrConfig& cfg = {})
{
    Raster gray = src.channels() == 3 ? imaging::to_grayscale(src) : src;
    if (cfg.denoise) gray = imaging::median3(gray);
    // A two-level image is already a clean render; blurring it only moves
    // stroke edges once thresholded.
    if (!detail::at_most_two_levels(gray)) gray = imaging::gaussian_blur3(gray);
    if (cfg.adaptive) return imaging::adaptive_threshold(gray, cfg.adaptive_window, cfg.adaptive_offset);
    int level = cfg.fallback_level;
    try {
        level = imaging::otsu_threshold(gray);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateHistogram) throw;
    }
    return imaging::binarize(gray, level);
}

namespace detail {

inline imaging::PixelBox unite(const imaging::PixelBox& a, const imaging::PixelBox& b)
{
    return {std::min(a.left, b.left), std::min(a.top, b.top), std::max(a.right, b.right),
            std::max(a.bottom, b.bottom)};
}

/// Height of a full 5x7 cell whose width is w, rounded half up.
inline int cell_height(int w) { return (14 * w + 5) / 10; }

// Components stack into one glyph (':', '!', '?') when their columns
// overlap and together they still fit one character cell.
inline bool same_cell(const imaging::PixelBox& a, const imaging::PixelBox& b)
{
    if (std::max(a.left, b.left) > std::min(a.right, b.right)) return false;
    const auto u = unite(a, b);
    const int cell = cell_height(u.width());
    const int slack = std::max(1, cell / 2);
    const int gap = std::max(a.top, b.top) - std::min(a.bottom, b.bottom) - 1;
    return u.height() <= cell + slack && gap <= (3 * cell + kGlyphRows - 1) / kGlyphRows;
}

inline double vertical_overlap_ratio(const imaging::PixelBox& a, const imaging::PixelBox& b)
{
    const int overlap = std::min(a.bottom, b.bottom) - std::max(a.top, b.top) + 1;
    if (overlap <= 0) return 0;
    return static_cast<double>(overlap) / std::min(a.height(), b.height());
}

}  // namespace detail

inline SegmentedPage segment_page(const Raster& binary, long min_component_pixels = 3)
{
    SegmentedPage page;
    page.labeling = imaging::label_components(binary);

    std::vector<GlyphUnit> units;
    for (const auto& comp : page.labeling.components) {
        if (comp.pixel_count >= min_component_pixels) units.push_back({comp.box, {comp.label}});
    }

    for (bool merged = true; merged;) {
        merged = false;
        std::sort(units.begin(), units.end(), [](const GlyphUnit& a, const GlyphUnit& b) {
            return std::tie(a.box.left, a.box.top) < std::tie(b.box.left, b.box.top);
        });
        for (std::size_t i = 0; i < units.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < units.size() && units[j].box.left <= units[i].box.right; ++j) {
                if (!detail::same_cell(units[i].box, units[j].box)) continue;
                units[i].box = detail::unite(units[i].box, units[j].box);
                units[i].labels.insert(units[i].labels.end(), units[j].labels.begin(), units[j].labels.end());
                units.erase(units.begin() + static_cast<std::ptrdiff_t>(j));
                merged = true;
                break;
            }
        }
    }

    std::sort(units.begin(), units.end(), [](const GlyphUnit& a, const GlyphUnit& b) {
        return std::tie(a.box.top, a.box.left) < std::tie(b.box.top, b.box.left);
    });
    for (auto& unit : units) {
        auto line = std::find_if(page.lines.begin(), page.lines.end(), [&](const TextLine& l) {
            return detail::vertical_overlap_ratio(l.box, unit.box) >= 0.5;
        });
        if (line == page.lines.end()) {
            page.lines.push_back({{}, unit.box});
            line = page.lines.end() - 1;
        } else {
            line->box = detail::unite(line->box, unit.box);
        }
        line->glyphs.push_back(std::move(unit));
    }
    for (auto& line : page.lines) {
        std::sort(line.glyphs.begin(), line.glyphs.end(), [](const GlyphUnit& a, const GlyphUnit& b) {
            return std::tie(a.box.left, a.box.top) < std::tie(b.box.left, b.box.top);
        });
    }
    std::sort(page.lines.begin(), page.lines.end(), [](const TextLine& a, const TextLine& b) {
        return std::tie(a.box.top, a.box.left) < std::tie(b.box.top, b.box.left);
    });
    return page;
}

inline std::vector<TextLine> segment_lines(const Raster& binary) { return segment_page(binary).lines; }

/// The glyph's character cell: its own columns, bottom-aligned, with the
/// height a 5x7 cell of that width would have. Only the glyph's own
/// components are copied in.
inline Raster crop_glyph(const SegmentedPage& page, const GlyphUnit& glyph)
{
    const auto& box = glyph.box;
    const int w = box.width();
    const int h = std::max(detail::cell_height(w), box.height());
    const int top = box.bottom - h + 1;
    Raster crop(w, h, 1);
    for (int y = std::max(0, top); y <= box.bottom; ++y) {
        for (int x = box.left; x <= box.right; ++x) {
            const int label = page.labeling.label_at(x, y);
            if (label != 0 && std::find(glyph.labels.begin(), glyph.labels.end(), label) != glyph.labels.end()) {
                crop.at(x - box.left, y - top) = 255;
            }
        }
    }
    return crop;
}

/// Nearest-neighbour resample of a binary crop onto the 5x7 grid.
inline GlyphBitmap normalize_glyph(const Raster& crop)
{
    GlyphBitmap cells{};
    for (int r = 0; r < kGlyphRows; ++r) {
        const int sy = (2 * r + 1) * crop.height() / (2 * kGlyphRows);
        for (int c = 0; c < kGlyphCols; ++c) {
            const int sx = (2 * c + 1) * crop.width() / (2 * kGlyphCols);
            cells[r * kGlyphCols + c] = crop.at(sx, sy) == 255;
        }
    }
    return cells;
}

inline GlyphMatch match_glyph(const Raster& crop, const GlyphFont& font = GlyphFont::builtin(),
                              double reject_threshold = 0.7)
{
    if (crop.channels() != 1) throw Error(ErrorKind::InvalidInput, "glyph crop must be single-channel");
    const GlyphBitmap cells = normalize_glyph(crop);
    int best_matches = -1;
    char best = '?';
    for (const auto& [ch, bitmap] : font.glyphs()) {
        int matches = 0;
        for (int i = 0; i < kGlyphCells; ++i) matches += cells[i] == bitmap[i];
        if (matches > best_matches) best_matches = matches, best = ch;
    }
    const double score = static_cast<double>(best_matches) / kGlyphCells;
    return {score < reject_threshold ? '?' : best, score};
}

inline std::vector<TextBlock> recognize_text(const Raster& src, const OcrConfig& cfg = {},
                                             const GlyphFont& font = GlyphFont::builtin())
{
    const Raster binary = preprocess_for_ocr(src, cfg);
    const SegmentedPage page = segment_page(binary, cfg.min_component_pixels);
    std::vector<TextBlock> blocks;
    for (const auto& line : page.lines) {
        if (line.glyphs.empty()) continue;
        std::vector<int> widths;
        for (const auto& g : line.glyphs) widths.push_back(g.box.width());
        std::sort(widths.begin(), widths.end());
        const std::size_t n = widths.size();
        const double median = n % 2 ? widths[n / 2] : (widths[n / 2 - 1] + widths[n / 2]) / 2.0;

        TextBlock block;
        double score_sum = 0;
        for (std::size_t i = 0; i < line.glyphs.size(); ++i) {
            if (i > 0) {
                const int gap = line.glyphs[i].box.left - line.glyphs[i - 1].box.right - 1;
                if (gap > 0.5 * median) block.text.push_back(' ');
            }
            const auto match = match_glyph(crop_glyph(page, line.glyphs[i]), font, cfg.reject_threshold);
            block.text.push_back(match.ch);
            score_sum += match.score;
        }
        block.confidence = score_sum / static_cast<double>(line.glyphs.size());
        block.box = {static_cast<double>(line.box.left), static_cast<double>(line.box.top),
                     static_cast<double>(line.box.right + 1), static_cast<double>(line.box.bottom + 1)};
        blocks.push_back(std::move(block));
    }
    return blocks;
}

struct OcrEngineConfig {
    std::string command;  // must contain "{image}"
    std::chrono::milliseconds timeout{5000};
};

/// Runs an external OCR command and turns each non-empty stdout line into a
/// full-frame block with confidence 1.
inline std::vector<TextBlock> external_ocr(const std::filesystem::path& image, const OcrEngineConfig& cfg)
{
    auto argv = process::split_command(cfg.command);
    if (!process::contains_placeholder(argv, "{image}")) {
        throw Error(ErrorKind::Config, "OCR engine command must contain {image}");
    }
    if (!std::filesystem::exists(image)) throw Error(ErrorKind::InvalidInput, "no such image " + image.string());
    Box frame_box;
    try {
        const Raster raster = pnm::read(image);
        frame_box = {0, 0, static_cast<double>(raster.width()), static_cast<double>(raster.height())};
    } catch (const Error&) {
        // Non-PNM input is the engine's business; the block box stays empty.
    }

    process::RunResult result;
    try {
        result = process::run(process::substitute(argv, "{image}", image.string()), cfg.timeout);
    } catch (const process::SpawnFailure& e) {
        throw Error(ErrorKind::EngineUnavailable, e.what());
    }
    if (result.timed_out) throw Error(ErrorKind::EngineUnavailable, "OCR engine timed out");
    if (result.exit_code != 0) {
        throw Error(ErrorKind::EngineUnavailable, "OCR engine exited with status " + std::to_string(result.exit_code));
    }

    std::vector<TextBlock> blocks;
    std::size_t pos = 0;
    const std::string& out = result.output;
    while (pos < out.size()) {
        auto end = out.find('\n', pos);
        if (end == std::string::npos) end = out.size();
        std::string line = out.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        blocks.push_back({std::move(line), frame_box, 1.0});
    }
    return blocks;
}

class TextReader {
public:
    virtual ~TextReader() = default;
    virtual std::vector<TextBlock> read(const Frame& frame) = 0;
};

class TemplateTextReader : public TextReader {
public:
    explicit TemplateTextReader(OcrConfig cfg = {}, GlyphFont font = GlyphFont::builtin())
        : cfg_(cfg), font_(std::move(font))
    {
    }

    std::vector<TextBlock> read(const Frame& frame) override
    {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return recognize_text(frame.image, cfg_, font_);
    }

    std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

private:
    OcrConfig cfg_;
    GlyphFont font_;
    std::atomic<std::size_t> calls_{0};
};

class ExternalTextReader : public TextReader {
public:
    explicit ExternalTextReader(OcrEngineConfig cfg) : cfg_(std::move(cfg))
    {
        if (!process::contains_placeholder(process::split_command(cfg_.command), "{image}")) {
            throw Error(ErrorKind::Config, "OCR engine command must contain {image}");
        }
    }

    ~ExternalTextReader() override
    {
        std::error_code ec;
        if (!scratch_.empty()) std::filesystem::remove(scratch_, ec);
    }

    std::vector<TextBlock> read(const Frame& frame) override
    {
        if (!frame.path.empty()) return external_ocr(frame.path, cfg_);
        if (scratch_.empty()) {
            scratch_ = std::filesystem::temp_directory_path() /
                       ("audioaid-ocr-" + std::to_string(::getpid()) + "-" +
                        std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".pnm");
        }
        pnm::write(scratch_, frame.image);
        return external_ocr(scratch_, cfg_);
    }

private:
    OcrEngineConfig cfg_;
    std::filesystem::path scratch_;
};

}  // namespace audioaid

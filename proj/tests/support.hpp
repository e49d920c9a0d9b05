#pragma once

// Shared helpers for the unit and acceptance suites.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "audioaid/font.hpp"
#include "audioaid/raster.hpp"

namespace testsupport {

inline const std::filesystem::path kDataDir = AUDIOAID_TEST_DATA;
inline const std::filesystem::path kStubDir = AUDIOAID_TEST_STUBS;

class TempDir {
public:
    TempDir()
    {
        std::string tmpl = (std::filesystem::temp_directory_path() / "audioaid-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::size_t levenshtein(const std::string& a, const std::string& b)
{
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// Each pixel independently becomes black (p/2) or white (p/2), all channels.
inline audioaid::Raster salt_and_pepper(audioaid::Raster img, double p, unsigned seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double r = u(rng);
            if (r >= p) continue;
            const std::uint8_t v = r < p / 2 ? 0 : 255;
            for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = v;
        }
    }
    return img;
}

/// Font characters plus single interior spaces.
inline std::string random_text(std::mt19937& rng, std::size_t length)
{
    std::string alphabet;
    for (const auto& [ch, bitmap] : audioaid::GlyphFont::builtin().glyphs()) alphabet += ch;
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size());  // last index means space
    std::string s;
    while (s.size() < length) {
        const std::size_t k = pick(rng);
        const bool space = k == alphabet.size();
        if (space && (s.empty() || s.back() == ' ' || s.size() + 1 == length)) continue;
        s += space ? ' ' : alphabet[k];
    }
    return s;
}

struct OcrSample {
    std::string text;
    audioaid::Raster page;
};

/// 50 pages: lengths 1..20, scales 2..5, alternating RGB-on-color and gray pages.
inline std::vector<OcrSample> ocr_corpus()
{
    std::mt19937 rng(20240611);
    std::uniform_int_distribution<std::size_t> len(1, 20);
    std::vector<OcrSample> out;
    for (int i = 0; i < 50; ++i) {
        std::string text = random_text(rng, len(rng));
        audioaid::RenderStyle style;
        style.scale = 2 + i % 4;
        if (i % 2 == 0) {
            style.color = true;
            style.ink = {static_cast<std::uint8_t>(20 + i), 40, 160};
            style.background = {240, static_cast<std::uint8_t>(200 + i), 190};
        } else {
            style.ink = {static_cast<std::uint8_t>(10 + i)};
            style.background = {static_cast<std::uint8_t>(180 + i)};
        }
        out.push_back({text, audioaid::render_text({text}, style)});
    }
    return out;
}

inline std::string joined_text(const std::vector<std::string>& lines)
{
    std::string s;
    for (const auto& l : lines) {
        if (!s.empty()) s += '\n';
        s += l;
    }
    return s;
}

}  // namespace testsupport

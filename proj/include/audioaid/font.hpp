#pragma once

// 5x7 bitmap font used both to render test pages and as the template set
// for glyph matching. File format: a line holding the character, then 7
// rows of 5 cells from {'#', '.'}.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "audioaid/error.hpp"
#include "audioaid/raster.hpp"

namespace audioaid {

inline constexpr int kGlyphCols = 5;
inline constexpr int kGlyphRows = 7;
inline constexpr int kGlyphCells = kGlyphCols * kGlyphRows;

/// Row-major 5x7 cells, 1 = ink.
using GlyphBitmap = std::array<std::uint8_t, kGlyphCells>;

namespace detail {

inline constexpr std::string_view kBuiltinFont = R"FONT(
A
#####
#...#
#...#
#####
#...#
#...#
#...#
B
####.
#...#
#...#
#####
#...#
#...#
####.
C
#####
#....
#....
#....
#....
#....
#####
D
#####
#...#
#...#
#...#
#...#
#...#
####.
E
#####
#....
#....
####.
#....
#....
#####
F
#####
#....
#....
####.
#....
#....
#....
G
#####
#....
#....
#.###
#...#
#...#
#####
H
#...#
#...#
#...#
#####
#...#
#...#
#...#
I
#####
..#..
..#..
..#..
..#..
..#..
#####
J
#####
...#.
...#.
...#.
...#.
#..#.
####.
K
#...#
#..##
#.##.
###..
#.##.
#..##
#...#
L
#....
#....
#....
#....
#....
#....
#####
M
#...#
##.##
#####
#.#.#
#...#
#...#
#...#
N
#...#
##..#
###.#
#.###
#..##
#...#
#...#
O
.###.
##.##
#...#
#...#
#...#
##.##
.###.
P
#####
#...#
#...#
#####
#....
#....
#....
Q
#####
#...#
#...#
#...#
#...#
#..##
###.#
R
#####
#...#
#...#
#####
#.##.
#..##
#...#
S
#####
#....
#....
#####
....#
....#
#####
T
#####
..#..
..#..
..#..
..#..
..#..
..#..
U
#...#
#...#
#...#
#...#
#...#
#...#
#####
V
#...#
#...#
#...#
##.##
.#.#.
.###.
..#..
W
#...#
#...#
#.#.#
#.#.#
#.#.#
#####
.#.#.
X
#...#
##.##
.###.
..#..
.###.
##.##
#...#
Y
#...#
##.##
.###.
..#..
..#..
..#..
..#..
Z
#####
...##
..##.
.##..
##...
#....
#####
0
#####
#.#.#
#.#.#
#...#
#...#
#...#
#####
1
..#..
.##..
..#..
..#..
..#..
..#..
#####
2
#####
....#
....#
#####
#....
#....
#####
3
#####
....#
....#
.####
....#
....#
#####
4
#...#
#...#
#...#
#####
....#
....#
....#
5
#####
#....
#####
....#
....#
#...#
#####
6
#....
#....
#....
#####
#...#
#...#
#####
7
#####
....#
...##
..##.
..#..
..#..
..#..
8
#####
#...#
#####
#...#
#...#
#...#
#####
9
#####
#...#
#...#
#####
....#
....#
....#
.
.....
.....
.....
.....
.....
#####
#####
,
.....
.....
.....
.....
#####
...##
..##.
:
.....
#####
#####
.....
.....
#####
#####
!
#####
.###.
..#..
..#..
..#..
.....
.###.
?
#####
....#
...##
..##.
..#..
.....
.###.
)FONT";

}  // namespace detail

class GlyphFont {
public:
    static GlyphFont parse(std::string_view text)
    {
        std::vector<std::string_view> lines;
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            auto line = text.substr(pos, end - pos);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines.push_back(line);
            pos = end + 1;
        }

        GlyphFont font;
        std::set<GlyphBitmap> bitmaps;
        for (std::size_t i = 0; i < lines.size();) {
            if (lines[i].empty()) {
                ++i;
                continue;
            }
            if (lines[i].size() != 1) throw Error(ErrorKind::Config, "font record must start with one character");
            const char c = lines[i][0];
            if (i + kGlyphRows >= lines.size()) {
                throw Error(ErrorKind::Config, std::string("truncated glyph '") + c + "'");
            }
            GlyphBitmap bitmap{};
            for (int r = 0; r < kGlyphRows; ++r) {
                const auto row = lines[i + 1 + r];
                if (row.size() != kGlyphCols) throw Error(ErrorKind::Config, std::string("bad row in glyph '") + c + "'");
                for (int col = 0; col < kGlyphCols; ++col) {
                    if (row[col] != '#' && row[col] != '.') {
                        throw Error(ErrorKind::Config, std::string("bad cell in glyph '") + c + "'");
                    }
                    bitmap[r * kGlyphCols + col] = row[col] == '#';
                }
            }
            if (font.glyphs_.count(c)) throw Error(ErrorKind::Config, std::string("duplicate glyph '") + c + "'");
            if (!bitmaps.insert(bitmap).second) {
                throw Error(ErrorKind::Config, std::string("glyph '") + c + "' duplicates another bitmap");
            }
            font.glyphs_.emplace(c, bitmap);
            i += 1 + kGlyphRows;
        }
        if (font.glyphs_.empty()) throw Error(ErrorKind::Config, "font has no glyphs");
        return font;
    }

    static GlyphFont load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::Io, "cannot open font " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(text);
    }

    /// A-Z, 0-9 and . , : ! ?
    static const GlyphFont& builtin()
    {
        static const GlyphFont font = parse(detail::kBuiltinFont);
        return font;
    }

    /// Ordered by code point, which is also the match tie-break order.
    const std::map<char, GlyphBitmap>& glyphs() const noexcept { return glyphs_; }
    bool contains(char c) const noexcept { return glyphs_.count(c) != 0; }
    const GlyphBitmap& at(char c) const { return glyphs_.at(c); }

    friend bool operator==(const GlyphFont&, const GlyphFont&) = default;

private:
    std::map<char, GlyphBitmap> glyphs_;
};

struct RenderStyle {
    int scale = 1;
    int margin = 4;       // pixels around the text block
    int char_gap = 1;     // font cells between glyphs
    int line_gap = 7;     // font cells between lines
    std::array<std::uint8_t, 3> ink{0, 0, 0};
    std::array<std::uint8_t, 3> background{255, 255, 255};
    bool color = false;   // RGB output when set, else gray from ink[0]/background[0]
};

/// Renders lines of text; ' ' is a blank glyph cell. Unknown characters throw.
inline Raster render_text(const std::vector<std::string>& lines, const RenderStyle& style = {},
                          const GlyphFont& font = GlyphFont::builtin())
{
    if (style.scale < 1) throw Error(ErrorKind::InvalidParameter, "render scale must be >= 1");
    const int s = style.scale;
    std::size_t longest = 0;
    for (const auto& line : lines) longest = std::max(longest, line.size());
    const int cols = longest == 0 ? 0
                                  : static_cast<int>(longest) * kGlyphCols +
                                        (static_cast<int>(longest) - 1) * style.char_gap;
    const int rows = lines.empty() ? 0
                                   : static_cast<int>(lines.size()) * kGlyphRows +
                                         (static_cast<int>(lines.size()) - 1) * style.line_gap;
    const int width = std::max(1, cols * s + 2 * style.margin);
    const int height = std::max(1, rows * s + 2 * style.margin);
    const int channels = style.color ? 3 : 1;

    Raster out(width, height, channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) out.at(x, y, c) = style.background[c];
        }
    }
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const int top = style.margin + static_cast<int>(li) * (kGlyphRows + style.line_gap) * s;
        for (std::size_t ci = 0; ci < lines[li].size(); ++ci) {
            const char ch = lines[li][ci];
            if (ch == ' ') continue;
            if (!font.contains(ch)) throw Error(ErrorKind::InvalidInput, std::string("no glyph for '") + ch + "'");
            const auto& bitmap = font.at(ch);
            const int left = style.margin + static_cast<int>(ci) * (kGlyphCols + style.char_gap) * s;
            for (int r = 0; r < kGlyphRows; ++r) {
                for (int col = 0; col < kGlyphCols; ++col) {
                    if (!bitmap[r * kGlyphCols + col]) continue;
                    for (int dy = 0; dy < s; ++dy) {
                        for (int dx = 0; dx < s; ++dx) {
                            for (int c = 0; c < channels; ++c) {
                                out.at(left + col * s + dx, top + r * s + dy, c) = style.ink[c];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace audioaid

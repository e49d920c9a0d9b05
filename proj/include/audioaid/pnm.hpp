#pragma once

// Binary PGM (P5) / PPM (P6) reader and writer, maxval 255 only.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "audioaid/error.hpp"
#include "audioaid/raster.hpp"

namespace audioaid::pnm {

namespace detail {

class HeaderCursor {
public:
    explicit HeaderCursor(std::string_view bytes) : bytes_(bytes) {}

    int next_int()
    {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            throw Error(ErrorKind::InvalidInput, "malformed PNM header");
        }
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) throw Error(ErrorKind::InvalidInput, "PNM header value too large");
            ++pos_;
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t data_offset()
    {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            throw Error(ErrorKind::InvalidInput, "malformed PNM header");
        }
        return pos_ + 1;
    }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 2;
};

}  // namespace detail

inline Raster decode(std::string_view bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw Error(ErrorKind::InvalidInput, "not a binary PGM/PPM stream");
    }
    const int channels = bytes[1] == '5' ? 1 : 3;
    detail::HeaderCursor cursor(bytes);
    const int width = cursor.next_int();
    const int height = cursor.next_int();
    const int maxval = cursor.next_int();
    if (maxval != 255) throw Error(ErrorKind::InvalidInput, "only maxval 255 is supported");
    if (width < 1 || height < 1) throw Error(ErrorKind::InvalidInput, "PNM dimensions must be >= 1");
    const std::size_t offset = cursor.data_offset();
    const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - offset < expected) throw Error(ErrorKind::InvalidInput, "truncated PNM raster");
    auto first = bytes.begin() + static_cast<std::ptrdiff_t>(offset);
    return Raster(width, height, channels,
                  std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(expected)));
}

inline std::string encode(const Raster& image)
{
    std::string out = image.channels() == 1 ? "P5\n" : "P6\n";
    out += std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    auto samples = image.samples();
    out.append(reinterpret_cast<const char*>(samples.data()), samples.size());
    return out;
}

inline Raster read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

inline void write(const std::filesystem::path& path, const Raster& image)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    const std::string bytes = encode(image);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace audioaid::pnm

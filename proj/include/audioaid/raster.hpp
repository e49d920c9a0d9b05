#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "audioaid/error.hpp"

namespace audioaid {

/// Row-major 8-bit image with 1 (gray/binary) or 3 (RGB) interleaved channels.
class Raster {
public:
    Raster() = default;

    Raster(int width, int height, int channels, std::uint8_t fill = 0)
        : width_(width), height_(height), channels_(channels)
    {
        check_shape(width, height, channels);
        samples_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    Raster(int width, int height, int channels, std::vector<std::uint8_t> samples)
        : width_(width), height_(height), channels_(channels), samples_(std::move(samples))
    {
        check_shape(width, height, channels);
        if (samples_.size() != static_cast<std::size_t>(width) * height * channels) {
            throw Error(ErrorKind::InvalidInput, "sample count does not match " + std::to_string(width) +
                                                     "x" + std::to_string(height) + "x" +
                                                     std::to_string(channels));
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return samples_.empty(); }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

    std::span<const std::uint8_t> samples() const noexcept { return samples_; }
    std::span<std::uint8_t> samples() noexcept { return samples_; }

    std::uint8_t at(int x, int y, int c = 0) const noexcept
    {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t& at(int x, int y, int c = 0) noexcept
    {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    /// Edge-replicated gray read; coordinates outside the raster clamp to the border.
    std::uint8_t clamped(int x, int y) const noexcept
    {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return samples_[static_cast<std::size_t>(y) * width_ + x];
    }

    bool is_binary() const noexcept
    {
        if (channels_ != 1) return false;
        for (auto v : samples_) {
            if (v != 0 && v != 255) return false;
        }
        return true;
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    static void check_shape(int width, int height, int channels)
    {
        if (width < 1 || height < 1) {
            throw Error(ErrorKind::InvalidInput, "raster dimensions must be >= 1");
        }
        if (channels != 1 && channels != 3) {
            throw Error(ErrorKind::InvalidInput, "raster channels must be 1 or 3");
        }
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> samples_;
};

}  // namespace audioaid

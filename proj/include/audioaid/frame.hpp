#pragma once

#include <cstdint>
#include <filesystem>

#include "audioaid/raster.hpp"

namespace audioaid {

/// One sourced frame. timestamp is seconds on the pipeline clock; path is
/// set when the frame came from a file.
struct Frame {
    Raster image;
    std::int64_t index = 0;
    double timestamp = 0;
    std::filesystem::path path;
};

}  // namespace audioaid

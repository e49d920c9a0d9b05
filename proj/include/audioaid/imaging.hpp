#pragma once

// Pure raster operations for the reader's preprocessing chain. Every window
// operation replicates edge pixels; every division rounds half up.

#include <algorithm>
#include <array>
#include <cstdint>
#include <tuple>
#include <vector>

#include "audioaid/error.hpp"
#include "audioaid/raster.hpp"

namespace audioaid::imaging {

/// Axis-aligned pixel box, inclusive on both ends.
struct PixelBox {
    int left = 0;
    int top = 0;
    int right = 0;
    int bottom = 0;

    int width() const noexcept { return right - left + 1; }
    int height() const noexcept { return bottom - top + 1; }
    long area() const noexcept { return static_cast<long>(width()) * height(); }

    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct Component {
    PixelBox box;
    long pixel_count = 0;
    int label = 0;

    friend bool operator==(const Component&, const Component&) = default;
};

/// Components plus the per-pixel label map (0 = background).
struct Labeling {
    std::vector<Component> components;
    std::vector<int> labels;
    int width = 0;
    int height = 0;

    int label_at(int x, int y) const noexcept { return labels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline void require_gray(const Raster& src, const char* op)
{
    if (src.channels() != 1) {
        throw Error(ErrorKind::InvalidInput, std::string(op) + " requires a single-channel raster");
    }
}

}  // namespace detail

/// BT.601 luma, computed in integer thousandths so rounding is exact.
inline Raster to_grayscale(const Raster& src)
{
    if (src.channels() != 3) throw Error(ErrorKind::InvalidInput, "to_grayscale requires an RGB raster");
    Raster out(src.width(), src.height(), 1);
    auto in = src.samples();
    auto dst = out.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const unsigned weighted = 299u * in[3 * i] + 587u * in[3 * i + 1] + 114u * in[3 * i + 2];
        dst[i] = static_cast<std::uint8_t>(std::min(255u, (weighted + 500u) / 1000u));
    }
    return out;
}

inline Raster gaussian_blur3(const Raster& src)
{
    detail::require_gray(src, "gaussian_blur3");
    static constexpr std::array<int, 3> kWeights{1, 2, 1};
    Raster out(src.width(), src.height(), 1);
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            int sum = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    sum += kWeights[dy + 1] * kWeights[dx + 1] * src.clamped(x + dx, y + dy);
                }
            }
            out.at(x, y) = static_cast<std::uint8_t>((sum + 8) / 16);
        }
    }
    return out;
}

inline Raster median3(const Raster& src)
{
    detail::require_gray(src, "median3");
    Raster out(src.width(), src.height(), 1);
    std::array<std::uint8_t, 9> window{};
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            std::size_t k = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) window[k++] = src.clamped(x + dx, y + dy);
            }
            std::nth_element(window.begin(), window.begin() + 4, window.end());
            out.at(x, y) = window[4];
        }
    }
    return out;
}

inline std::array<long, 256> histogram(const Raster& src)
{
    detail::require_gray(src, "histogram");
    std::array<long, 256> hist{};
    for (auto v : src.samples()) ++hist[v];
    return hist;
}

/// Otsu level: pixels <= t form the low class. Among equal between-class
/// variances the smallest t wins. Throws DegenerateHistogram on constant input.
inline int otsu_threshold(const Raster& src)
{
    const auto hist = histogram(src);
    const long total = static_cast<long>(src.pixel_count());
    long total_sum = 0;
    int distinct = 0;
    for (int v = 0; v < 256; ++v) {
        total_sum += hist[v] * v;
        distinct += hist[v] > 0;
    }
    if (distinct < 2) throw Error(ErrorKind::DegenerateHistogram, "constant raster has no threshold");

    // Between-class variance is proportional to d^2 / (n0 * n1) with
    // d = N * sum0 - n0 * S. Compared as exact cross products while they fit.
    using u128 = unsigned __int128;
    const bool exact = total <= (1L << 19);

    int best_t = -1;
    u128 best_num = 0, best_den = 1;
    long double best_ratio = 0.0L;
    long n0 = 0, sum0 = 0;
    for (int t = 0; t <= 254; ++t) {
        n0 += hist[t];
        sum0 += hist[t] * static_cast<long>(t);
        const long n1 = total - n0;
        if (n0 == 0 || n1 == 0) continue;
        // |d| = n0 * n1 * |mean1 - mean0| <= 255 * N^2 / 4, so the products stay below 2^125.
        const long long d = static_cast<long long>(total) * sum0 - static_cast<long long>(n0) * total_sum;
        const unsigned long long ad = static_cast<unsigned long long>(d < 0 ? -d : d);
        if (exact) {
            const u128 num = static_cast<u128>(ad) * ad;
            const u128 den = static_cast<u128>(n0) * static_cast<u128>(n1);
            if (best_t < 0 || num * best_den > best_num * den) best_t = t, best_num = num, best_den = den;
        } else {
            const long double ratio = static_cast<long double>(ad) * ad / (static_cast<long double>(n0) * n1);
            if (best_t < 0 || ratio > best_ratio) best_t = t, best_ratio = ratio;
        }
    }
    return best_t;
}

namespace detail {

// Ink is always the foreground minority: invert when 255 exceeds half the pixels.
inline void normalize_polarity(Raster& binary)
{
    auto samples = binary.samples();
    const auto fg = std::count(samples.begin(), samples.end(), std::uint8_t{255});
    if (2 * static_cast<std::size_t>(fg) > samples.size()) {
        for (auto& v : samples) v = static_cast<std::uint8_t>(255 - v);
    }
}

}  // namespace detail

inline Raster binarize(const Raster& src, int level)
{
    detail::require_gray(src, "binarize");
    Raster out(src.width(), src.height(), 1);
    auto in = src.samples();
    auto dst = out.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = in[i] > level ? 255 : 0;
    detail::normalize_polarity(out);
    return out;
}

/// Local-mean threshold: 255 where pixel > mean(window) - offset.
inline Raster adaptive_threshold(const Raster& src, int window, double offset)
{
    detail::require_gray(src, "adaptive_threshold");
    if (window < 3 || window % 2 == 0) {
        throw Error(ErrorKind::InvalidParameter, "adaptive window must be odd and >= 3");
    }
    const int r = window / 2;
    const double area = static_cast<double>(window) * window;
    const int w = src.width();
    const int h = src.height();

    // Summed-area table over the edge-replicated image padded by r on each side.
    const int pw = w + 2 * r;
    const int ph = h + 2 * r;
    std::vector<long> integral(static_cast<std::size_t>(pw + 1) * (ph + 1), 0);
    auto at = [&](int x, int y) -> long& { return integral[static_cast<std::size_t>(y) * (pw + 1) + x]; };
    for (int y = 0; y < ph; ++y) {
        long row = 0;
        for (int x = 0; x < pw; ++x) {
            row += src.clamped(x - r, y - r);
            at(x + 1, y + 1) = at(x + 1, y) + row;
        }
    }

    Raster out(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const long sum = at(x + window, y + window) - at(x, y + window) - at(x + window, y) + at(x, y);
            out.at(x, y) = src.at(x, y) * area > static_cast<double>(sum) - offset * area ? 255 : 0;
        }
    }
    detail::normalize_polarity(out);
    return out;
}

/// 4-connected labeling of 255 pixels. Labels are dense from 1 in (top, left) order.
inline Labeling label_components(const Raster& binary)
{
    detail::require_gray(binary, "connected_components");
    const int w = binary.width();
    const int h = binary.height();
    Labeling result;
    result.width = w;
    result.height = h;
    std::vector<int> provisional(binary.pixel_count(), 0);

    std::vector<Component> found;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (binary.at(x, y) != 255 || provisional[idx] != 0) continue;
            const int id = static_cast<int>(found.size()) + 1;
            Component comp{{x, y, x, y}, 0, id};
            provisional[idx] = id;
            stack.emplace_back(x, y);
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                ++comp.pixel_count;
                comp.box.left = std::min(comp.box.left, cx);
                comp.box.right = std::max(comp.box.right, cx);
                comp.box.top = std::min(comp.box.top, cy);
                comp.box.bottom = std::max(comp.box.bottom, cy);
                constexpr std::array<std::pair<int, int>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
                for (auto [dx, dy] : kSteps) {
                    const int nx = cx + dx;
                    const int ny = cy + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                    if (binary.at(nx, ny) == 255 && provisional[nidx] == 0) {
                        provisional[nidx] = id;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
            found.push_back(comp);
        }
    }

    // Raster-scan discovery order is not (top, left) bounding-box order in general.
    std::vector<int> order(found.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::tie(found[a].box.top, found[a].box.left) < std::tie(found[b].box.top, found[b].box.left);
    });
    std::vector<int> relabel(found.size() + 1, 0);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        Component comp = found[order[rank]];
        relabel[comp.label] = static_cast<int>(rank) + 1;
        comp.label = static_cast<int>(rank) + 1;
        result.components.push_back(comp);
    }
    result.labels.resize(provisional.size());
    for (std::size_t i = 0; i < provisional.size(); ++i) result.labels[i] = relabel[provisional[i]];
    return result;
}

inline std::vector<Component> connected_components(const Raster& binary)
{
    return label_components(binary).components;
}

}  // namespace audioaid::imaging

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace audioaid {

/// Linear interpolation at rank p/100 * (n - 1) over the sorted samples.
inline std::optional<double> percentile(std::vector<double> samples, double p)
{
    if (samples.empty()) return std::nullopt;
    std::sort(samples.begin(), samples.end());
    const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(samples.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, samples.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return samples[lo] + (samples[hi] - samples[lo]) * frac;
}

/// Per-run latency samples in milliseconds plus frame accounting.
struct Metrics {
    std::vector<double> capture_ms;
    std::vector<double> inference_ms;
    std::vector<double> arbitrate_ms;
    std::vector<double> speak_ms;
    std::vector<double> end_to_end_ms;
    std::vector<double> overhead_ms;  // end_to_end minus inference

    std::size_t sourced = 0;
    std::size_t processed = 0;
    std::size_t dropped = 0;

    std::vector<std::int64_t> processed_indices;
    std::vector<std::int64_t> dispatch_lag;  // newest sourced index minus dispatched index
    std::int64_t max_dispatch_lag = 0;
};

namespace detail {

inline std::string format_ms(std::optional<double> v)
{
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

inline std::string stage_line(const char* name, const std::vector<double>& samples)
{
    std::string line = name;
    line += " p50=" + format_ms(percentile(samples, 50));
    line += " p95=" + format_ms(percentile(samples, 95));
    line += " max=" + format_ms(samples.empty() ? std::nullopt
                                                : std::optional(*std::max_element(samples.begin(), samples.end())));
    return line + "\n";
}

}  // namespace detail

/// Fixed field order; empty percentile fields when a stage has no samples.
inline std::string metrics_report(const Metrics& m)
{
    std::string out;
    out += "frames_sourced " + std::to_string(m.sourced) + "\n";
    out += "frames_processed " + std::to_string(m.processed) + "\n";
    out += "frames_dropped " + std::to_string(m.dropped) + "\n";
    out += "max_dispatch_lag " + std::to_string(m.max_dispatch_lag) + "\n";
    out += detail::stage_line("capture_ms", m.capture_ms);
    out += detail::stage_line("inference_ms", m.inference_ms);
    out += detail::stage_line("arbitrate_ms", m.arbitrate_ms);
    out += detail::stage_line("speak_enqueue_ms", m.speak_ms);
    out += detail::stage_line("end_to_end_ms", m.end_to_end_ms);
    out += detail::stage_line("overhead_ms", m.overhead_ms);
    return out;
}

}  // namespace audioaid

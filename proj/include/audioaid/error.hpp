#pragma once

#include <stdexcept>
#include <string>

namespace audioaid {

enum class ErrorKind {
    InvalidInput,
    InvalidParameter,
    DegenerateHistogram,
    BackendUnavailable,
    EngineUnavailable,
    SinkClosed,
    Config,
    Io,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::InvalidParameter: return "invalid parameter";
    case ErrorKind::DegenerateHistogram: return "degenerate histogram";
    case ErrorKind::BackendUnavailable: return "backend unavailable";
    case ErrorKind::EngineUnavailable: return "engine unavailable";
    case ErrorKind::SinkClosed: return "sink closed";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Io: return "i/o error";
    }
    return "error";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace audioaid

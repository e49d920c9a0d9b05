#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace audioaid {

using LogFn = std::function<void(const std::string&)>;

inline LogFn stderr_logger()
{
    return [](const std::string& message) {
        static std::mutex mu;
        std::lock_guard lock(mu);
        std::cerr << "audioaid: " << message << '\n';
    };
}

}  // namespace audioaid

#include <atomic>
#include <csignal>
#include <iostream>

#include "audioaid/cli.hpp"
#include "audioaid/process.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_interrupt(int) { g_stop.store(true); }

}  // namespace

int main(int argc, char** argv)
{
    audioaid::process::ignore_sigpipe();
    std::signal(SIGINT, on_interrupt);
    return audioaid::run_cli(argc, argv, std::cout, std::cerr, &g_stop);
}

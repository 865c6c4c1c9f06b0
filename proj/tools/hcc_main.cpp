#include <atomic>
#include <csignal>
#include <iostream>

#include "hcc/cli.hpp"

namespace {

std::atomic<bool> interrupted{false};

extern "C" void on_sigint(int) { interrupted.store(true); }

}  // namespace

int main(int argc, char** argv) {
    // First Ctrl-C asks for an orderly stop; the run finalizes and writes its trace.
    std::signal(SIGINT, on_sigint);
    return hcc::run_cli(argc, argv, std::cout, std::cerr, &interrupted);
}

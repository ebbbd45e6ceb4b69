#include "coldstart/parallel.hpp"

#include <iostream>

#include "text.hpp"

namespace coldstart {

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_worker_count(unsigned n) {
    if (n == 0) n = std::max(1U, std::thread::hardware_concurrency());
    g_workers.store(n);
}

unsigned worker_count() { return g_workers.load(); }

void warn_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

}  // namespace coldstart

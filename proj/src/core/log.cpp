#include "touchgen/core/log.hpp"

#include <iostream>
#include <mutex>

namespace touchgen::log {

namespace {

std::mutex g_mutex;
bool g_quiet = false;

void stderr_sink(Level level, const std::string& message) {
    if (g_quiet && level == Level::info) return;
    std::cerr << "[touchgen] " << (level == Level::warning ? "warning: " : "") << message << '\n';
}

Sink& sink() {
    static Sink s = stderr_sink;
    return s;
}

void emit(Level level, const std::string& message) {
    std::lock_guard<std::mutex> lock(g_mutex);
    sink()(level, message);
}

}  // namespace

Sink set_sink(Sink s) {
    std::lock_guard<std::mutex> lock(g_mutex);
    Sink previous = sink();
    sink() = s ? std::move(s) : Sink(stderr_sink);
    return previous;
}

void set_quiet(bool quiet) { g_quiet = quiet; }

void info(const std::string& message) { emit(Level::info, message); }
void warning(const std::string& message) { emit(Level::warning, message); }

}  // namespace touchgen::log

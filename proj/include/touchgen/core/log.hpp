#pragma once

#include <functional>
#include <string>

namespace touchgen::log {

enum class Level { info, warning };

using Sink = std::function<void(Level, const std::string&)>;

// Default sink writes "[touchgen] warning: ..." lines to stderr. Returns the
// previous sink so tests can restore it.
Sink set_sink(Sink sink);
void set_quiet(bool quiet);

void info(const std::string& message);
void warning(const std::string& message);

}  // namespace touchgen::log

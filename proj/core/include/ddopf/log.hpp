#pragma once

#include <string_view>

namespace ddopf::log {

enum class Level { kDebug, kInfo, kWarn, kError, kOff };

void set_level(Level level);

// Reads DDOPF_LOG (debug|info|warn|error|off); unset leaves the default (warn).
void configure_from_env();

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

}  // namespace ddopf::log

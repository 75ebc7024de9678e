#include "ddopf/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace ddopf::log {
namespace {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("ddopf");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

spdlog::level::level_enum to_spd(Level level) {
  switch (level) {
    case Level::kDebug: return spdlog::level::debug;
    case Level::kInfo: return spdlog::level::info;
    case Level::kWarn: return spdlog::level::warn;
    case Level::kError: return spdlog::level::err;
    case Level::kOff: return spdlog::level::off;
  }
  return spdlog::level::warn;
}

}  // namespace

void set_level(Level level) { logger().set_level(to_spd(level)); }

void configure_from_env() {
  const char* env = std::getenv("DDOPF_LOG");
  if (env == nullptr) return;
  const std::string v(env);
  if (v == "debug") set_level(Level::kDebug);
  else if (v == "info") set_level(Level::kInfo);
  else if (v == "warn") set_level(Level::kWarn);
  else if (v == "error") set_level(Level::kError);
  else if (v == "off") set_level(Level::kOff);
  else warn("DDOPF_LOG: unknown level '" + v + "'");
}

void debug(std::string_view msg) { logger().debug("{}", msg); }
void info(std::string_view msg) { logger().info("{}", msg); }
void warn(std::string_view msg) { logger().warn("{}", msg); }
void error(std::string_view msg) { logger().error("{}", msg); }

}  // namespace ddopf::log

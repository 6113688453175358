#include "stepdad/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace stepdad::log {

namespace {
std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;

const char* tag(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    default: return "";
  }
}
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lvl, std::string_view message) {
  if (lvl < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[stepdad " << tag(lvl) << "] " << message << '\n';
}

}  // namespace stepdad::log

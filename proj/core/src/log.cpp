#include "fxprof/log.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

namespace fxprof::log {
namespace {

Level initial_level() {
  const char* env = std::getenv("FX_LOG_LEVEL");
  if (!env) return Level::Info;
  if (auto l = parse_level(env)) return *l;
  std::cerr << "warning: FX_LOG_LEVEL='" << env << "' is not quiet/info/debug; using info\n";
  return Level::Info;
}

Level& current() {
  static Level l = initial_level();
  return l;
}

}  // namespace

std::optional<Level> parse_level(std::string_view name) {
  if (name == "quiet") return Level::Quiet;
  if (name == "info") return Level::Info;
  if (name == "debug") return Level::Debug;
  return std::nullopt;
}

Level level() { return current(); }
void set_level(Level l) { current() = l; }

void info(std::string_view m) {
  if (current() != Level::Quiet) std::cerr << m << '\n';
}
void debug(std::string_view m) {
  if (current() == Level::Debug) std::cerr << m << '\n';
}
void warn(std::string_view m) {
  if (current() != Level::Quiet) std::cerr << "warning: " << m << '\n';
}

}  // namespace fxprof::log

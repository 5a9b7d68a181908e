#pragma once

#include <optional>
#include <string_view>

namespace fxprof::log {

enum class Level { Quiet, Info, Debug };

std::optional<Level> parse_level(std::string_view name);
/// Current level; initialized from FX_LOG_LEVEL (default info).
Level level();
void set_level(Level level);

/// Diagnostics go to stderr so stdout stays machine-readable.
void info(std::string_view message);
void debug(std::string_view message);
void warn(std::string_view message);

}  // namespace fxprof::log

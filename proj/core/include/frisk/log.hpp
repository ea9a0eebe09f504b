#pragma once

#include <string_view>

namespace frisk::log {

/// Level comes from the FRISK_LOG_LEVEL environment variable
/// (trace, debug, info, warn, error, off; default warn). Output goes to stderr.
void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

} // namespace frisk::log

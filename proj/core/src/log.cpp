#include "frisk/log.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace frisk::log {
namespace {

spdlog::logger& logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto l = spdlog::stderr_color_mt("frisk");
        l->set_pattern("[%l] %v");
        const char* env = std::getenv("FRISK_LOG_LEVEL");
        l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
        return l;
    }();
    return *instance;
}

} // namespace

void debug(std::string_view msg) { logger().debug(msg); }
void info(std::string_view msg) { logger().info(msg); }
void warn(std::string_view msg) { logger().warn(msg); }
void error(std::string_view msg) { logger().error(msg); }

} // namespace frisk::log

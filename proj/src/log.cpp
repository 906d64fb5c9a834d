#include "ws3d/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

#include "ws3d/error.hpp"

namespace ws3d {

void init_logging(const std::string& level) {
    std::string name = level;
    if (name.empty()) {
        if (const char* env = std::getenv(kLogLevelEnv)) name = env;
    }
    if (name.empty()) name = "info";
    const auto lvl = spdlog::level::from_str(name);
    if (lvl == spdlog::level::off && name != "off") throw Error("unknown log level '" + name + "'");
    auto logger = spdlog::get("ws3d");
    if (!logger) logger = spdlog::stderr_color_mt("ws3d");
    spdlog::set_default_logger(logger);
    spdlog::set_level(lvl);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

}  // namespace ws3d

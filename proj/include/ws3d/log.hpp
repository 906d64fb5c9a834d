#pragma once

#include <string>

namespace ws3d {

inline constexpr const char* kLogLevelEnv = "WS3D_LOG_LEVEL";

/// Configures the default spdlog logger (stderr). `level` wins over the
/// WS3D_LOG_LEVEL environment variable; the fallback is "info".
void init_logging(const std::string& level = {});

}  // namespace ws3d

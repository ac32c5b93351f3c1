#include "clb/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace clb {

void init_logging() {
  auto level = spdlog::level::info;
  if (const char* env = std::getenv("CLB_LOG")) {
    const std::string_view v{env};
    if (v == "error") level = spdlog::level::err;
    else if (v == "debug") level = spdlog::level::debug;
    else if (v == "info") level = spdlog::level::info;
  }
  if (!spdlog::get("clb")) spdlog::set_default_logger(spdlog::stderr_color_mt("clb"));
  spdlog::set_level(level);
  spdlog::set_pattern("[%l] %v");
}

}  // namespace clb

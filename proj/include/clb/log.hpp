#pragma once

#include <spdlog/spdlog.h>

namespace clb {

// Configures the global logger from CLB_LOG={error,info,debug}. Default: info.
void init_logging();

}  // namespace clb

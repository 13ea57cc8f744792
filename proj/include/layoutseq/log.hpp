#pragma once

#include <spdlog/spdlog.h>

namespace layoutseq {

/// Sets the global log level from UNILAYOUT_LOG (trace, debug, info,
/// warn, error, off). Defaults to info.
void init_logging();

}  // namespace layoutseq

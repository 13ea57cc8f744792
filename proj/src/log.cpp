#include "layoutseq/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace layoutseq {

void init_logging() {
  auto level = spdlog::level::info;
  if (const char* env = std::getenv("UNILAYOUT_LOG")) {
    const auto parsed = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept "off" when asked for.
    if (parsed != spdlog::level::off || std::string(env) == "off") level = parsed;
  }
  auto logger = spdlog::get("layoutseq");
  if (!logger) logger = spdlog::stderr_color_mt("layoutseq");
  spdlog::set_default_logger(logger);
  spdlog::set_level(level);
}

}  // namespace layoutseq

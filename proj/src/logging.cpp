#include "strawbot/logging.hpp"

#include <cstdlib>
#include <mutex>

#include <spdlog/spdlog.h>

namespace strawbot {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    const char* env = std::getenv("STRAWBOT_LOG");
    spdlog::set_level(env && *env ? spdlog::level::from_str(env) : spdlog::level::warn);
    spdlog::set_pattern("[%l] %v");
  });
}

}  // namespace strawbot

#pragma once

namespace strawbot {

/// Sets the spdlog level from STRAWBOT_LOG (trace, debug, info, warn, error,
/// off; default warn). Safe to call repeatedly; only the first call reads the
/// environment.
void init_logging();

}  // namespace strawbot

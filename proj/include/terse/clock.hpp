#pragma once

namespace terse {

/// Seconds on the process-wide monotonic clock shared by requests and power samples.
double monotonic_seconds();

}  // namespace terse

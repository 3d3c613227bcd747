#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace tssdn {

// Simulated time and durations are integer nanoseconds. Every constant used
// by the reference scenario (0.96 us, 122.4 us, 575.4 us ...) is exact here.
using SimTime = std::int64_t;

inline constexpr SimTime kNsPerUs = 1000;
inline constexpr SimTime kNsPerMs = 1000 * kNsPerUs;
inline constexpr SimTime kNsPerS = 1000 * kNsPerMs;

inline SimTime from_us(double us) { return static_cast<SimTime>(std::llround(us * 1000.0)); }
inline constexpr double to_us(SimTime ns) { return static_cast<double>(ns) / 1000.0; }

// Fixed three-decimal microsecond rendering used by every CSV writer, so
// outputs do not depend on locale or floating point formatting defaults.
std::string format_us(SimTime ns);

// Positive modulo for periodic schedules.
inline constexpr SimTime wrap(SimTime t, SimTime period) {
  SimTime r = t % period;
  return r < 0 ? r + period : r;
}

}  // namespace tssdn

#pragma once

#include <cstddef>
#include <functional>

namespace ergodic {

/// Name of the environment variable holding the default worker count.
inline constexpr const char* kWorkersEnv = "ERGODIC_WORKERS";

/// Worker count from ERGODIC_WORKERS, else hardware concurrency (at least 1).
/// Throws ConfigError on a malformed value.
std::size_t default_workers();

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; the first exception thrown is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace ergodic

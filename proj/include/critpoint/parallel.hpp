#pragma once

#include <cstdint>
#include <functional>
#include <random>

namespace critpoint {

// Resolves a requested worker count: 0 means the available hardware parallelism.
unsigned resolve_threads(unsigned requested);

// Runs task(i) for i in [0, count) on up to `threads` workers. Work items are claimed
// dynamically, so tasks must write only to their own slot. The first exception thrown
// by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task);

// Independent stream for work item `stream` under a base seed.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace critpoint

#pragma once

#include <cstddef>
#include <functional>

namespace tempora {

// Worker cap: TEMPORA_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs body(i) for i in [0, n). Each index must write only its own output
// slot; results are then independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace tempora

#pragma once

#include <functional>

namespace bdex {

// Calls body(worker, i) for every i in [0, count) on at most `jobs` threads.
// Work items are claimed in index order; with jobs <= 1 everything runs on
// the calling thread. The exception thrown by the lowest failing index is
// rethrown after all workers finish.
void parallel_for(int count, int jobs, const std::function<void(int worker, int index)>& body);

}  // namespace bdex

#pragma once

#include <cstddef>
#include <functional>

namespace levyfp {

/// Worker count used by parallel loops. 0 (default) means
/// std::thread::hardware_concurrency().
void set_thread_count(int n);
int thread_count();

/// Calls body(i) for i in [0, n). Work is split into contiguous blocks so
/// results written by index do not depend on the thread count. The first
/// exception thrown by any block is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace levyfp

#pragma once

#include <functional>

namespace gsedit {

/// Worker count used by parallel_for. Defaults to the hardware concurrency,
/// overridable with the GSEDIT_THREADS environment variable or set_thread_count.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for i in [0, n). Work items are split into contiguous chunks;
/// fn must only write to state owned by index i. Calls made from inside a
/// worker run serially on that worker.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace gsedit

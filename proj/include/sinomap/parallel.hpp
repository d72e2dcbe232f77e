#pragma once

namespace sinomap {

/// Thread cap for internal parallelism: min(hardware threads, SINOMAP_THREADS).
/// Read once on first use. All parallel loops in this library write disjoint
/// outputs, so results do not depend on the thread count.
int thread_cap();

}  // namespace sinomap

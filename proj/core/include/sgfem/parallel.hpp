#pragma once

#include <cstddef>
#include <functional>

namespace sgfem {

/// Worker count used by parallel_for. Defaults to the hardware concurrency.
void set_num_threads(int n);
int num_threads();

/// Calls body(begin, end) on disjoint contiguous chunks covering [0, n).
/// Chunk boundaries depend only on n and the thread count, and each index is
/// visited exactly once, so callers writing disjoint outputs are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace sgfem

#pragma once

#include <cstddef>

namespace bsdei {

// Process-wide worker-count hint.  Parallel loops only ever write to disjoint
// output slots and reductions are combined in a fixed order, so the hint
// changes wall time, never results.
void set_max_threads(unsigned n);
unsigned max_threads();

namespace detail {
void parallel_for_impl(std::size_t n, void* ctx, void (*body)(void*, std::size_t, std::size_t));
}

// Runs body(lo, hi) over a partition of [0, n) into contiguous chunks.  The
// chunking is derived from n alone, so the set of calls (and therefore any
// per-chunk state) does not depend on the worker count.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    detail::parallel_for_impl(n, &body, [](void* ctx, std::size_t lo, std::size_t hi) {
        (*static_cast<F*>(ctx))(lo, hi);
    });
}

}  // namespace bsdei

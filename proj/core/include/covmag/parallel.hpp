#pragma once

#include <cstddef>
#include <functional>

namespace covmag {

// Runs fn(i) for i in [0, n) on up to n_threads workers. Work items must be
// independent and write only to their own output slots; reductions belong in
// the caller, after the join, in index order. That keeps every result
// bit-identical for any worker count.
void parallel_for(std::size_t n, unsigned n_threads,
                  const std::function<void(std::size_t)>& fn);

unsigned resolve_thread_count(unsigned requested);  // 0 -> hardware

}  // namespace covmag

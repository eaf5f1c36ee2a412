#pragma once

#include <cstddef>
#include <functional>

namespace cfield {

// Worker count: `requested` if positive, else $CFIELD_THREADS, else 1.
int resolve_threads(int requested);

// Splits [0, count) into `workers` contiguous chunks (fixed by count and
// workers only) and runs fn(worker, begin, end) for each non-empty chunk.
// Chunk 0 runs on the calling thread. Chunks run with denormals flushed to
// zero. Exceptions from any worker are rethrown after all workers join.
void parallel_chunks(std::size_t count, int workers,
                     const std::function<void(int, std::size_t, std::size_t)>& fn);

}  // namespace cfield

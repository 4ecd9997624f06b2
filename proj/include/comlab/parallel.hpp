#pragma once

// Execution-policy switch shared by all kernels.  Every parallel kernel is
// written so that the serial and OpenMP paths perform identical arithmetic in
// identical order (loop iterations are independent, or reductions are chunked
// with a fixed chunk layout merged in chunk order).  Tests assert bitwise
// agreement between the two paths.

#include <cstddef>
#include <vector>

namespace comlab {

enum class Exec { serial, parallel };

// Fixed chunking for deterministic reductions: the chunk layout depends only
// on `count`, never on the thread count.
struct ChunkPlan {
    std::size_t count;
    std::size_t chunk;
    std::size_t n_chunks;
};

inline ChunkPlan make_chunks(std::size_t count, std::size_t target_chunks = 64) {
    ChunkPlan plan{};
    plan.count = count;
    if (count == 0) {
        plan.chunk = 1;
        plan.n_chunks = 0;
        return plan;
    }
    std::size_t chunk = (count + target_chunks - 1) / target_chunks;
    if (chunk == 0) chunk = 1;
    plan.chunk = chunk;
    plan.n_chunks = (count + chunk - 1) / chunk;
    return plan;
}

}  // namespace comlab

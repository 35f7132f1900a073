#pragma once

#include <cstdint>
#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace foregan {

// Keeps large transient buffers (tensor storage, im2col scratch) on the
// heap free list instead of round-tripping pages through mmap on every op.
// Call once from main in long-running pipelines.
inline void tune_allocator() {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
}

// Thread-local switch for intra-op parallelism. Kernels partition work by
// output coordinate and each coordinate's reduction runs in a fixed order,
// so results are bit-identical for any thread count. Frame-level workers
// disable it to avoid oversubscription.
inline bool& intra_op_parallel() {
    thread_local bool enabled = true;
    return enabled;
}

struct IntraOpSerialGuard {
    IntraOpSerialGuard() : prev_(intra_op_parallel()) { intra_op_parallel() = false; }
    ~IntraOpSerialGuard() { intra_op_parallel() = prev_; }
    IntraOpSerialGuard(const IntraOpSerialGuard&) = delete;
    IntraOpSerialGuard& operator=(const IntraOpSerialGuard&) = delete;

  private:
    bool prev_;
};

template <class F>
inline void parallel_for(std::int64_t n, const F& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (intra_op_parallel() && n > 1)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        body(i);
    }
}

// As above, but stays serial when the estimated total work is too small to
// amortize a parallel region.
template <class F>
inline void parallel_for_grain(std::int64_t n, std::int64_t total_work, const F& body) {
    constexpr std::int64_t kMinWork = 32768;
    if (total_work < kMinWork) {
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    parallel_for(n, body);
}

} // namespace foregan

#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace eci {

// Keep the model's large scratch buffers on the heap rather than in
// per-allocation mmaps. glibc only.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

} // namespace eci

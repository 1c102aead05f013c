#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gazeseq {

/// Keeps large freed blocks (per-batch activation buffers) in the heap instead of returning
/// them to the OS after every batch.
inline void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif
}

}  // namespace gazeseq

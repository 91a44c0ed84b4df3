#pragma once

#include <cstddef>

namespace pwg {

// Number of threads kernels may use. Defaults to the hardware concurrency,
// capped by the PWG_THREADS environment variable when set.
int kernel_threads();

// Override the cap programmatically (0 restores the default behaviour).
void set_kernel_threads(int n);

}  // namespace pwg

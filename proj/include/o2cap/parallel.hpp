#pragma once

namespace o2cap {

/// Caps OpenMP parallelism from the O2CAP_THREADS environment variable.
/// Returns the thread count in effect afterwards.
int configure_threads_from_env();

int max_threads();

}  // namespace o2cap

#pragma once

namespace f2f::par {

// Thread cap for OpenMP regions. Reads F2F_THREADS once (default: machine
// parallelism). Results are bit-identical for any value: parallel loops only
// ever write disjoint outputs, and every accumulation runs in a fixed index
// order inside a single iteration.
int threads();

}  // namespace f2f::par

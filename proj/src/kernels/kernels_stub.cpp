// Used when GFL_NATIVE_KERNELS=OFF: no SIMD tables are linked in.

#include "gfl/kernels/kernels.hpp"

namespace gfl::kernels {
const Ops* avx2_ops() { return nullptr; }
const Ops* neon_ops() { return nullptr; }
}  // namespace gfl::kernels

#pragma once
// Inner-loop arithmetic kernels, double precision.
//
// Every kernel exists as a scalar reference implementation plus optional
// SIMD variants (AVX2 on x86-64, NEON on aarch64) selected once at runtime.
// The scalar table is the oracle: SIMD variants are equivalence-tested
// against it (exactly for elementwise maps, to tight tolerance for the
// reductions, which reassociate).
//
// All matrices are dense row-major. GEMM kernels accumulate into C.

#include <cstddef>

namespace gfl::kernels {

enum class Backend { scalar, avx2, neon };

struct Ops {
  Backend backend;
  const char* name;

  // C[p x r] += A[p x q] * B[q x r]
  void (*gemm_nn)(const double* a, const double* b, double* c, int p, int q, int r);
  // C[p x r] += A[p x q] * B[r x q]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, int p, int q, int r);
  // C[q x r] += A[p x q]^T * B[p x r]
  void (*gemm_tn)(const double* a, const double* b, double* c, int p, int q, int r);

  double (*dot)(int n, const double* a, const double* b);
  void (*axpy)(int n, double s, const double* x, double* y);            // y += s*x
  void (*add)(int n, const double* a, const double* b, double* y);      // y = a+b
  void (*sub)(int n, const double* a, const double* b, double* y);      // y = a-b
  void (*mul)(int n, const double* a, const double* b, double* y);      // y = a*b
  void (*scale)(int n, double s, const double* x, double* y);           // y = s*x
  void (*lrelu)(int n, double slope, const double* x, double* y);
  // gx += g * (x >= 0 ? 1 : slope)
  void (*lrelu_grad)(int n, double slope, const double* x, const double* g, double* gx);
  double (*sum)(int n, const double* x);
  double (*maxv)(int n, const double* x);  // n >= 1
};

// Table selected once per process: best available backend, overridable with
// the environment variable GFL_KERNELS=scalar|avx2|neon (checked on first use).
const Ops& active();

// Reference table, always available.
const Ops& scalar_ops();

// Table for an explicit backend, or nullptr when the CPU lacks it.
const Ops* ops_for(Backend backend);

bool cpu_has_avx2();

// Worker budget for data-parallel loops inside ops (not the kernels
// themselves, which are single-threaded). Benchmarks pin this to 1.
int max_threads();
void set_max_threads(int n);

}  // namespace gfl::kernels

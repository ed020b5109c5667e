#pragma once
// Shared helpers for the op implementations.

#include <stdexcept>
#include <string>

#include "gfl/kernels/kernels.hpp"
#include "gfl/tensor.hpp"

namespace gfl::detail {

inline const kernels::Ops& k() { return kernels::active(); }

// Row-partitioned GEMMs; deterministic for any worker count since each
// output row is produced by exactly one worker in a fixed reduction order.
// The _tn form transposes A into scratch and reuses the nn tile kernel,
// which is much friendlier to the cache than a strided accumulation.
void par_gemm_nn(const double* a, const double* b, double* c, int p, int q, int r);
void par_gemm_nt(const double* a, const double* b, double* c, int p, int q, int r);
void par_gemm_tn(const double* a, const double* b, double* c, int p, int q, int r);

// Single-worker k-blocked nn GEMM (for callers already inside a parallel
// region, e.g. the per-image conv loops).
void gemm_nn_serial(const double* a, const double* b, double* c, int p, int q, int r);

// dst[j, i] = src[i, j]; dst is cols x rows.
void transpose_into(const double* src, double* dst, int rows, int cols);

[[noreturn]] inline void fail(const std::string& what) { throw std::invalid_argument(what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace gfl::detail

// Scalar kernels are the oracle; whatever SIMD table the host supports must
// agree with them: bit-exactly for elementwise maps, to tight relative
// tolerance for reductions and GEMM (different association order).

#include <doctest.h>

#include <cmath>
#include <vector>

#include "gfl/kernels/kernels.hpp"
#include "gfl/rng.hpp"

using namespace gfl;
using kernels::Ops;

namespace {

std::vector<double> random_vec(int n, uint64_t tag) {
  RandomStream rs(0x5eedULL + tag);
  std::vector<double> v(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = rs.normal(static_cast<uint64_t>(i));
  return v;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<const Ops*> simd_tables() {
  std::vector<const Ops*> t;
  if (const Ops* a = kernels::ops_for(kernels::Backend::avx2)) t.push_back(a);
  if (const Ops* n = kernels::ops_for(kernels::Backend::neon)) t.push_back(n);
  return t;
}

}  // namespace

TEST_CASE("gemm variants agree with scalar reference") {
  const Ops& ref = kernels::scalar_ops();
  for (const Ops* simd : simd_tables()) {
    // Sizes straddle the 4x8 register tile and its remainders.
    struct Dims {
      int p, q, r;
    };
    for (auto [p, q, r] : {Dims{1, 1, 1}, {3, 5, 7}, {4, 4, 8}, {9, 17, 23},
                           {16, 32, 16}, {33, 7, 12}}) {
      auto a = random_vec(p * q, 1);
      auto b = random_vec(q * r, 2);
      auto bt = random_vec(r * q, 3);
      auto bp = random_vec(p * r, 4);
      std::vector<double> c0(static_cast<size_t>(p * r), 0.5), c1 = c0;
      ref.gemm_nn(a.data(), b.data(), c0.data(), p, q, r);
      simd->gemm_nn(a.data(), b.data(), c1.data(), p, q, r);
      for (size_t i = 0; i < c0.size(); ++i) CHECK(rel_err(c0[i], c1[i]) < 1e-13);

      std::vector<double> d0(static_cast<size_t>(p * r), -0.25), d1 = d0;
      ref.gemm_nt(a.data(), bt.data(), d0.data(), p, q, r);
      simd->gemm_nt(a.data(), bt.data(), d1.data(), p, q, r);
      for (size_t i = 0; i < d0.size(); ++i) CHECK(rel_err(d0[i], d1[i]) < 1e-13);

      std::vector<double> e0(static_cast<size_t>(q * r), 0.0), e1 = e0;
      ref.gemm_tn(a.data(), bp.data(), e0.data(), p, q, r);
      simd->gemm_tn(a.data(), bp.data(), e1.data(), p, q, r);
      for (size_t i = 0; i < e0.size(); ++i) CHECK(rel_err(e0[i], e1[i]) < 1e-13);
    }
  }
}

TEST_CASE("reductions agree with scalar reference") {
  const Ops& ref = kernels::scalar_ops();
  for (const Ops* simd : simd_tables()) {
    for (int n : {1, 2, 3, 4, 5, 7, 8, 9, 31, 64, 1001}) {
      auto a = random_vec(n, 10);
      auto b = random_vec(n, 11);
      CHECK(rel_err(ref.dot(n, a.data(), b.data()), simd->dot(n, a.data(), b.data())) < 1e-13);
      CHECK(rel_err(ref.sum(n, a.data()), simd->sum(n, a.data())) < 1e-12);
      CHECK(ref.maxv(n, a.data()) == simd->maxv(n, a.data()));
    }
  }
}

TEST_CASE("elementwise kernels are bit-exact across backends") {
  const Ops& ref = kernels::scalar_ops();
  for (const Ops* simd : simd_tables()) {
    for (int n : {1, 3, 4, 6, 17, 256}) {
      auto a = random_vec(n, 20);
      auto b = random_vec(n, 21);
      std::vector<double> y0(static_cast<size_t>(n)), y1(static_cast<size_t>(n));

      ref.add(n, a.data(), b.data(), y0.data());
      simd->add(n, a.data(), b.data(), y1.data());
      CHECK(y0 == y1);
      ref.sub(n, a.data(), b.data(), y0.data());
      simd->sub(n, a.data(), b.data(), y1.data());
      CHECK(y0 == y1);
      ref.mul(n, a.data(), b.data(), y0.data());
      simd->mul(n, a.data(), b.data(), y1.data());
      CHECK(y0 == y1);
      ref.scale(n, -1.75, a.data(), y0.data());
      simd->scale(n, -1.75, a.data(), y1.data());
      CHECK(y0 == y1);
      ref.lrelu(n, 0.2, a.data(), y0.data());
      simd->lrelu(n, 0.2, a.data(), y1.data());
      CHECK(y0 == y1);

      std::vector<double> g0 = b, g1 = b;
      ref.lrelu_grad(n, 0.2, a.data(), a.data(), g0.data());
      simd->lrelu_grad(n, 0.2, a.data(), a.data(), g1.data());
      for (int i = 0; i < n; ++i) CHECK(rel_err(g0[size_t(i)], g1[size_t(i)]) < 1e-15);
    }
  }
}

TEST_CASE("axpy matches reference") {
  const Ops& ref = kernels::scalar_ops();
  for (const Ops* simd : simd_tables()) {
    auto x = random_vec(133, 30);
    auto y0 = random_vec(133, 31);
    auto y1 = y0;
    ref.axpy(133, 0.37, x.data(), y0.data());
    simd->axpy(133, 0.37, x.data(), y1.data());
    for (size_t i = 0; i < y0.size(); ++i) CHECK(rel_err(y0[i], y1[i]) < 1e-15);
  }
}

TEST_CASE("dispatch reports a selected backend") {
  const Ops& a = kernels::active();
  CHECK(a.name != nullptr);
  if (kernels::cpu_has_avx2()) CHECK(kernels::ops_for(kernels::Backend::avx2) != nullptr);
}

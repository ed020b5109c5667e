#pragma once
// Small dense symmetric-matrix helpers for the metric computations.

#include "gfl/tensor.hpp"

namespace gfl {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues land in
// eigvals [n], eigenvectors in the columns of eigvecs [n x n].
void symmetric_eigen(const Tensor& a, Tensor& eigvals, Tensor& eigvecs);

// Principal square root of a symmetric PSD matrix; eigenvalues below zero are
// clamped. Fails if an eigenvalue is more negative than -tol.
Tensor matrix_sqrt_psd(const Tensor& a, double tol = 1e-6);

Tensor matmul_plain(const Tensor& a, const Tensor& b);

double trace(const Tensor& a);

}  // namespace gfl

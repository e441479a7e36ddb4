#pragma once

#include "rhf/common.hpp"

namespace rhf {

struct EigenDecomposition {
    RVec values;  // ascending
    CMat vectors; // orthonormal columns
};

// Dense Hermitian eigensolver (LAPACK divide and conquer). Takes the real
// symmetric path when the input has no imaginary part.
EigenDecomposition hermitian_eigh(const CMat& h);

// Eigenpairs with eigenvalue <= upper only (LAPACK MRRR, value range).
// Imaginary parts below 1e-14 of the largest entry are treated as rounding.
EigenDecomposition hermitian_eigh_below(const CMat& h, double upper);

// Solves (z - T) X = B in place for a real symmetric tridiagonal T given by
// its diagonal and sub-diagonal (LAPACK gtsv, partial pivoting).
void shifted_tridiagonal_solve(cplx z, const RVec& diag, const RVec& sub, CMat& rhs);

// Largest |A - A^H| entry.
double hermiticity_residual(const CMat& a);

} // namespace rhf

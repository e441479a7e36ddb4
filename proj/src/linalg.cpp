#include "rhf/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <vector>

namespace rhf {

EigenDecomposition hermitian_eigh(const CMat& h)
{
    const lapack_int n = static_cast<lapack_int>(h.rows());
    if (h.rows() != h.cols()) throw ValidationError("hermitian_eigh: matrix is not square");
    EigenDecomposition out;
    out.values.resize(n);
    if (n == 0) return out;

    if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
        RMat a = h.real();
        lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, out.values.data());
        if (info != 0) throw NumericalError("dsyevd failed with info=" + std::to_string(info));
        out.vectors = a.cast<cplx>();
        return out;
    }
    CMat a = h;
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', n, reinterpret_cast<lapack_complex_double*>(a.data()),
                                     n, out.values.data());
    if (info != 0) throw NumericalError("zheevd failed with info=" + std::to_string(info));
    out.vectors = std::move(a);
    return out;
}

EigenDecomposition hermitian_eigh_below(const CMat& h, double upper)
{
    const lapack_int n = static_cast<lapack_int>(h.rows());
    if (h.rows() != h.cols()) throw ValidationError("hermitian_eigh_below: matrix is not square");
    EigenDecomposition out;
    if (n == 0) return out;
    const double scale = h.cwiseAbs().maxCoeff();
    // Gershgorin bound keeps the search interval finite.
    double lower = 0.0;
    for (lapack_int i = 0; i < n; ++i) lower = std::min(lower, h(i, i).real() - h.row(i).cwiseAbs().sum());
    lower -= 1.0 + scale;
    if (!(upper > lower)) return {RVec(0), CMat(n, 0)};
    lapack_int found = 0;
    RVec w(n);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    if (h.imag().cwiseAbs().maxCoeff() <= 1e-14 * scale) {
        RMat a = h.real();
        RMat z(n, n);
        lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'V', 'U', n, a.data(), n, lower, upper, 0, 0, 0.0,
                                         &found, w.data(), z.data(), n, support.data());
        if (info != 0) throw NumericalError("dsyevr failed with info=" + std::to_string(info));
        out.values = w.head(found);
        out.vectors = z.leftCols(found).cast<cplx>();
        return out;
    }
    CMat a = h;
    CMat z(n, n);
    lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'V', 'U', n, reinterpret_cast<lapack_complex_double*>(a.data()),
                                     n, lower, upper, 0, 0, 0.0, &found, w.data(),
                                     reinterpret_cast<lapack_complex_double*>(z.data()), n, support.data());
    if (info != 0) throw NumericalError("zheevr failed with info=" + std::to_string(info));
    out.values = w.head(found);
    out.vectors = z.leftCols(found);
    return out;
}

void shifted_tridiagonal_solve(cplx z, const RVec& diag, const RVec& sub, CMat& rhs)
{
    const lapack_int n = static_cast<lapack_int>(diag.size());
    if (rhs.rows() != n || sub.size() + 1 != std::max<Eigen::Index>(n, 1))
        throw ValidationError("shifted_tridiagonal_solve: dimension mismatch");
    if (n == 0) return;
    CVec d = z - diag.cast<cplx>().array();
    CVec lo = -sub.cast<cplx>();
    CVec up = lo;
    auto zc = [](cplx* p) { return reinterpret_cast<lapack_complex_double*>(p); };
    lapack_int info = LAPACKE_zgtsv(LAPACK_COL_MAJOR, n, static_cast<lapack_int>(rhs.cols()), zc(lo.data()),
                                    zc(d.data()), zc(up.data()), zc(rhs.data()), n);
    if (info != 0) throw NumericalError("zgtsv: singular shifted matrix, info=" + std::to_string(info));
}

double hermiticity_residual(const CMat& a)
{
    if (a.size() == 0) return 0.0;
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

} // namespace rhf

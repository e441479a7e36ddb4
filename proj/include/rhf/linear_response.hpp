#pragma once

#include "rhf/bloch_solver.hpp"

namespace rhf {

// Bloch fiber f_q(x) = sum_K coeff_K e^{iKx} of a density or potential at
// momentum q; coefficients run over BlochBands::density_basis.
struct PeriodicDensity {
    Vec3 q = Vec3::Zero();
    CVec coeff;
};

// target <- source coupling under a momentum transfer p:
// target.q = source.q + p + g0 (g0 in the reciprocal lattice), so a plane wave
// of momentum p + G links K_t and K_s when G = K_t - K_s + g0.
struct Coupling {
    const Fiber* target = nullptr;
    const Fiber* source = nullptr;
    IVec3 g0{0, 0, 0};
};

// All fiber pairs coupled by momentum p. On-grid transfers reuse the grid
// fibers; otherwise auxiliary fibers at source.q + p are diagonalised on the
// plane-wave set of their source fiber.
class FiberCoupling {
public:
    FiberCoupling(const BlochBands& bands, const FermiData& fermi, const Vec3& p);
    FiberCoupling(const FiberCoupling&) = delete;
    FiberCoupling& operator=(const FiberCoupling&) = delete;

    const Vec3& momentum() const { return p_; }
    bool on_grid() const { return on_grid_; }
    const std::vector<Coupling>& pairs() const { return pairs_; }

private:
    Vec3 p_;
    bool on_grid_ = false;
    std::vector<std::unique_ptr<Fiber>> aux_;
    std::vector<Coupling> pairs_;
};

// map(i, j) = position of K_t(i) - K_s(j) + g0 in `dens`, or -1.
Eigen::MatrixXi pair_map(const Coupling& c, const PlaneWaveBasis& dens);

// Sum-over-states first-order density response to the potential v at momentum v.q.
PeriodicDensity apply_chi0(const BlochBands& bands, const FermiData& fermi, const FiberCoupling& coupling,
                           const PeriodicDensity& v);
PeriodicDensity apply_chi0(const BlochBands& bands, const FermiData& fermi, const PeriodicDensity& v);

// Dense chi0(q) over density_basis x density_basis.
CMat chi0_matrix(const BlochBands& bands, const FermiData& fermi, const FiberCoupling& coupling);

// 4 pi / |q+K|^2 with the neutral mode (q = 0, K = 0) set to zero.
RVec coulomb_multiplier(const PlaneWaveBasis& dens, const Vec3& q);

// Discrete Coulomb pairing |Gamma| sum_K 4 pi conj(f_K) g_K / |q+K|^2.
cplx coulomb_inner(const PlaneWaveBasis& dens, const Vec3& q, const CVec& f, const CVec& g, double volume);

// L(rho) = -chi0(v_c rho).
PeriodicDensity apply_L(const BlochBands& bands, const FermiData& fermi, const FiberCoupling& coupling,
                        const PeriodicDensity& rho);
PeriodicDensity apply_L(const BlochBands& bands, const FermiData& fermi, const PeriodicDensity& rho);

struct ResponseMatrixL {
    Mat3 L = Mat3::Zero();
    double L0 = 0.0;
};

ResponseMatrixL response_matrix_L(const BlochBands& bands, const FermiData& fermi);

// B(q) >= 0 with F[L_s rho](q) = B(q)/|q|^2 rho^(q).
double b_factor(const BlochBands& bands, const FermiData& fermi, const Vec3& q);

struct ContourSpec {
    cplx center = 0.0;
    double radius = 0.0;
    int n_nodes = 64;
};

ContourSpec make_contour(const FermiData& fermi, int n_nodes = 64);

// Nodes needed for a trapezoid error below tol, from the nearest-pole geometry.
int contour_nodes_for(const FermiData& fermi, double tol);

// Block of Q_{1,V} mapping the source fiber into the target fiber by
// trapezoidal quadrature of (1/2 pi i) \oint (z-H_t)^{-1} W (z-H_s)^{-1} dz.
CMat q1v_contour(const CrystalModel& model, const Coupling& c, const CMat& w, const ContourSpec& contour,
                 double fermi);

// Density of Q_{1,V} assembled from contour blocks over all fiber pairs.
PeriodicDensity q1v_density_contour(const BlochBands& bands, const FermiData& fermi, const PeriodicDensity& v,
                                    const ContourSpec& contour);

// Fourier transform rho^(p) of a density on R^3 (convention (2 pi)^{-3/2} \int e^{-ipx}).
using MomentumDensity = std::function<cplx(const Vec3&)>;

// Bloch fiber at momentum q of the second-order density from the -++ term
// and its adjoint, with V = rho * |x|^{-1}.
PeriodicDensity r2_density(const BlochBands& bands, const FermiData& fermi, const MomentumDensity& rho,
                           const Vec3& q);

// Bloch fiber of a density given by its Fourier transform:
// (2 pi)^{3/2} / |Gamma| rho^(q + K).
PeriodicDensity bloch_fiber(const BlochBands& bands, const MomentumDensity& rho, const Vec3& q);

// rho^(k) = (2 pi)^{-3/2} charge exp(-width^2 |k|^2 / 2).
MomentumDensity gaussian_density(double charge, double width);

} // namespace rhf

#pragma once

#include "rhf/lattice_basis.hpp"

#include <map>
#include <memory>

namespace rhf {

struct CrystalModel {
    Lattice lattice;
    std::map<IVec3, cplx> v_fourier; // V^_K in Hartree
    int n_electrons = 1;

    cplx v_hat(const IVec3& k) const
    {
        auto it = v_fourier.find(k);
        return it == v_fourier.end() ? cplx(0.0) : it->second;
    }
    // Throws ValidationError unless V^_{-K} = conj(V^_K) and N >= 1.
    void validate() const;
};

// V(x) = sum_i A_i cos(b_i . x) + v0 on a simple cubic lattice.
CrystalModel mathieu_model(const Vec3& amplitudes, double a = 2.0 * kPi, int n_electrons = 1, double v0 = 0.0);

// H_q(K,K') = |q+K|^2/2 delta_KK' + V^_{K-K'} over the given plane waves.
CMat assemble_fiber(const CrystalModel& model, const Vec3& q, const PlaneWaveBasis& basis);

enum class PhaseConvention {
    LargestReal,  // largest-modulus coefficient made real positive, ties to lowest index
    SeededRandom, // pseudo-random phases; used to probe gauge invariance
};

struct BandOptions {
    PhaseConvention phase = PhaseConvention::LargestReal;
    unsigned long long seed = 7;
};

struct Fiber {
    Vec3 q = Vec3::Zero();
    std::shared_ptr<const PlaneWaveBasis> basis;
    RVec eps;
    CMat coef; // columns c_{K,n}; u_n = |Gamma|^{-1/2} sum_K c_{K,n} e^{iKx}

    std::size_t dim() const { return basis->size(); }
};

struct BlochBands {
    CrystalModel model;
    BzGrid grid;
    double g_max = 0.0;
    BandOptions options;
    std::vector<Fiber> fibers;
    PlaneWaveBasis density_basis; // the q = 0 cutoff ball; index set for periodic densities
};

// Diagonalise H_q on an explicit plane-wave set.
Fiber diagonalize_fiber(const CrystalModel& model, const Vec3& q, std::shared_ptr<const PlaneWaveBasis> basis,
                        const BandOptions& options = {}, std::size_t phase_tag = 0);

// Each grid fiber uses the plane waves with |q+K| <= basis.g_max.
BlochBands solve_bands(const CrystalModel& model, const BzGrid& grid, const PlaneWaveBasis& basis,
                       const BandOptions& options = {});

struct FermiData {
    double sigma_plus = 0.0;
    double sigma_minus_next = 0.0;
    double fermi = 0.0;
    double gap = 0.0;
    int n_occupied = 0;
    double min_spectrum = 0.0;
};

FermiData fermi_level(const BlochBands& bands, int n_electrons, double gap_tol = 1e-8);
FermiData fermi_level(const BlochBands& bands, double gap_tol = 1e-8);

// Fermi level below every band: no occupied states, hence no response.
FermiData vacuum_fermi(const BlochBands& bands);

// Projector onto eigenvectors with eigenvalue <= fermi.
CMat spectral_projector(const CMat& fiber, double fermi);

// Fourier-series coefficients of rho0_per over bands.density_basis.
CVec periodic_density(const BlochBands& bands, const FermiData& fermi);

// Same coefficients over an arbitrary index set on the crystal lattice.
CVec periodic_density(const BlochBands& bands, const FermiData& fermi, const PlaneWaveBasis& onto);

// Ball of radius 2 g_max: holds every difference K - K' of one fiber, hence the
// complete Fourier support of rho0_per.
PlaneWaveBasis full_density_basis(const BlochBands& bands);

// rho(x) = sum_K rho_K e^{iKx} at real-space points x.
RVec sample_density(const PlaneWaveBasis& basis, const CVec& coeffs, const std::vector<Vec3>& points);

} // namespace rhf

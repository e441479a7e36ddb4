#pragma once

#include "rhf/linear_response.hpp"

#include <functional>

namespace rhf {

// nu(x) = Z (2 pi width^2)^{-3/2} exp(-|x - center|^2 / (2 width^2)).
struct DefectConfig {
    double charge = 0.01;
    double width = 2.0;
    Vec3 center = Vec3::Zero();
};

// The host crystal on an m x m x m supercell, folded to the supercell Gamma point.
struct Supercell {
    int m = 1;
    CrystalModel model;   // lattice m a_i, potential on the folded reciprocal lattice
    BlochBands host;      // single fiber at Gamma over the supercell plane waves
    FermiData fermi;      // fixed for every defect computation
    CMat p0;              // host projector gamma0
    CVec rho0;            // host density coefficients
    Eigen::MatrixXi diff; // diff(i, j): density-basis position of G_i - G_j, or -1

    double volume() const { return model.lattice.volume; }
    std::size_t dim() const { return host.fibers.front().dim(); }
};

// g_max is absolute (Bohr^-1); the supercell keeps plane waves with |G| <= g_max.
Supercell build_supercell(const CrystalModel& model, int m, double g_max, double gap_tol = 1e-8);

// Fourier-series coefficients nu_G = (Z/Omega) exp(-width^2 |G|^2 / 2) exp(-i G.c).
CVec defect_coefficients(const Supercell& cell, const DefectConfig& defect);

enum class Mixing { Linear, Anderson };

struct ScfOptions {
    double mix = 0.2;
    double tol = 1e-8;
    int max_iter = 100;
    Mixing mixing = Mixing::Linear;
    int anderson_depth = 5;
    double gap_tol = 1e-8;
    std::function<void(int, double)> on_iteration; // (iteration, residual)
};

struct RhoSample {
    Vec3 k = Vec3::Zero();
    cplx nu_hat = 0.0;
    cplx rho_hat = 0.0;

    // (nu^ - rho^)(k) / nu^(k)
    double screened_fraction() const { return std::real((nu_hat - rho_hat) / nu_hat); }
};

struct ScfResult {
    CVec rho;                            // defect density coefficients over the supercell density basis
    int iterations = 0;
    std::vector<double> residual_history;
    bool converged = false;
    double tr0 = 0.0;                    // Tr(gamma - gamma0)
    double idempotence = 0.0;            // |gamma^2 - gamma|_F of the last iterate
    std::vector<RhoSample> samples;      // smallest nonzero reciprocal shell
};

// Coulomb-weighted norm sqrt(Omega sum_{G != 0} 4 pi |r_G|^2 / |G|^2).
double coulomb_norm(const Supercell& cell, const CVec& r);

ScfResult scf_solve(const Supercell& cell, const DefectConfig& defect, const ScfOptions& options = {});

// First-order density rho1 solving rho1 = L(nu - rho1) by conjugate gradients.
ScfResult linear_response_solve(const Supercell& cell, const DefectConfig& defect, double tol = 1e-12);

struct ScreeningReport {
    double ratio = 1.0;     // shell average of (nu^ - rho^)/nu^
    double predicted = 1.0; // 1/(1 + L0)
    double rel_deviation = 0.0;
};

ScreeningReport screening_diagnostic(const ScfResult& result, const ResponseMatrixL& L);

struct AnisotropyReport {
    std::array<double, 3> ratios{};
    std::array<double, 3> predicted{};
    double spread = 0.0;           // max - min over axes
    double predicted_spread = 0.0;
    double max_rel_deviation = 0.0;
};

AnisotropyReport anisotropy_diagnostic(const ScfResult& result, const ResponseMatrixL& L);

} // namespace rhf

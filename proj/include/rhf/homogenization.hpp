#pragma once

#include "rhf/dielectric.hpp"

namespace rhf {

// Half-shifted cubic momentum grid {(i + 1/2) step} restricted to |k| <= radius.
struct KGrid {
    std::vector<Vec3> points;
    double cell = 0.0; // quadrature weight step^3
};

KGrid homogenization_grid(double radius, double step);

// nu_eta(x) = eta^3 nu(eta x), i.e. nu_eta^(k) = nu^(k / eta).
MomentumDensity rescale_density(const MomentumDensity& nu, double eta);

struct RescaledPotential {
    double eta = 1.0;
    std::vector<Vec3> k;
    std::vector<cplx> w_hat;
};

// W^eta(k) = 4 pi [eps~^{-1}]_{00}(eta k) nu^(k) / |k|^2.
RescaledPotential rescaled_potential(const BlochBands& bands, const FermiData& fermi, const MomentumDensity& nu,
                                     double eta, const KGrid& grid);

struct HomogenizedSolution {
    Mat3 epsilon_m = Mat3::Identity();
    std::vector<Vec3> k;
    std::vector<cplx> w_hat;
};

// W(k) = 4 pi nu^(k) / (k^T eps_M k).
HomogenizedSolution homogenized_solution(const MomentumDensity& nu, const Mat3& epsilon_m, const KGrid& grid);

struct TestWeight {
    Vec3 center = Vec3::Zero();
    double width = 1.0;
    double operator()(const Vec3& k) const { return std::exp(-0.5 * (k - center).squaredNorm() / (width * width)); }
};

// Five Gaussian bumps inside |k| <= 2.
std::vector<TestWeight> default_test_weights();

// max_g |sum (W^eta - W) conj(g)| / |sum W conj(g)|.
double weak_convergence_metric(const RescaledPotential& w_eta, const HomogenizedSolution& w_hom,
                               const std::vector<TestWeight>& weights);

} // namespace rhf

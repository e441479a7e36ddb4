#pragma once

#include "rhf/dielectric.hpp"

#include <doctest.h>

#include <random>

namespace rhf::test {

// Small crystals shared across test cases: Mathieu amplitudes, |K| <= 2, 3x3x3 grid.
struct SmallCrystal {
    CrystalModel model;
    BlochBands bands;
    FermiData fermi;
    ResponseMatrixL L;
};

inline SmallCrystal make_small(const Vec3& amplitudes, double g_max = 2.0, int n = 3,
                               const BandOptions& options = {})
{
    SmallCrystal c;
    c.model = mathieu_model(amplitudes);
    c.bands = solve_bands(c.model, bz_grid(c.model.lattice, n), enumerate_basis(c.model.lattice, g_max), options);
    c.fermi = fermi_level(c.bands);
    c.L = response_matrix_L(c.bands, c.fermi);
    return c;
}

inline const SmallCrystal& cubic()
{
    static const SmallCrystal c = make_small(Vec3(1, 1, 1));
    return c;
}

inline const SmallCrystal& aniso()
{
    static const SmallCrystal c = make_small(Vec3(3, 1, 1));
    return c;
}

inline CVec random_vector(std::mt19937_64& rng, Eigen::Index n)
{
    std::normal_distribution<double> g;
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
    return v;
}

inline Vec3 random_point(std::mt19937_64& rng, double half = 0.5)
{
    std::uniform_real_distribution<double> u(-half, half);
    return Vec3(u(rng), u(rng), u(rng));
}

} // namespace rhf::test

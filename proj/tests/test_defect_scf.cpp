#include "rhf/defect_scf.hpp"

#include "support.hpp"

#include <algorithm>

using namespace rhf;
using namespace rhf::test;

namespace {

constexpr double kGDef = 2.0;

const Supercell& cubic_cell(int m)
{
    static std::map<int, Supercell> cache;
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, build_supercell(mathieu_model(Vec3(1, 1, 1)), m, kGDef)).first;
    return it->second;
}

const Supercell& aniso_cell(int m)
{
    static std::map<int, Supercell> cache;
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, build_supercell(mathieu_model(Vec3(3, 1, 1)), m, kGDef)).first;
    return it->second;
}

// L at the reference resolution of the shipped presets.
const ResponseMatrixL& reference_L(bool aniso)
{
    static const SmallCrystal c = make_small(Vec3(1, 1, 1), 3.0, 4);
    static const SmallCrystal a = make_small(Vec3(3, 1, 1), 3.0, 4);
    return aniso ? a.L : c.L;
}

ScfOptions anderson()
{
    ScfOptions o;
    o.mixing = Mixing::Anderson;
    o.mix = 0.5;
    return o;
}

RVec sorted(const RVec& v)
{
    RVec s = v;
    std::sort(s.begin(), s.end());
    return s;
}

} // namespace

TEST_SUITE("defect_scf")
{
    TEST_CASE("m = 1 supercell is the unit-cell Gamma fiber")
    {
        CrystalModel model = mathieu_model(Vec3(1, 1, 1));
        Supercell cell = build_supercell(model, 1, kGDef);
        BlochBands unit = solve_bands(model, bz_grid(model.lattice, 1), enumerate_basis(model.lattice, kGDef));
        CHECK((cell.host.fibers.front().eps - unit.fibers.front().eps).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(cell.fermi.n_occupied == 1);
    }

    TEST_CASE("m = 2 supercell spectrum is the union of the folded unit-cell fibers")
    {
        for (const Vec3& amps : {Vec3(0, 0, 0), Vec3(1, 1, 1)}) {
            CrystalModel model = mathieu_model(amps);
            BlochBands unit = solve_bands(model, bz_grid(model.lattice, 2), enumerate_basis(model.lattice, kGDef));
            std::vector<double> all;
            for (const Fiber& f : unit.fibers) all.insert(all.end(), f.eps.begin(), f.eps.end());
            std::sort(all.begin(), all.end());
            CrystalModel big;
            big.lattice = cubic_lattice(4.0 * kPi);
            big.n_electrons = 8;
            for (const auto& [k, v] : model.v_fourier) big.v_fourier[{2 * k[0], 2 * k[1], 2 * k[2]}] = v;
            BlochBands cell = solve_bands(big, bz_grid(big.lattice, 1), enumerate_basis(big.lattice, kGDef));
            RVec s = sorted(cell.fibers.front().eps);
            REQUIRE(static_cast<std::size_t>(s.size()) == all.size());
            double worst = 0.0;
            for (std::size_t i = 0; i < all.size(); ++i) worst = std::max(worst, std::abs(s[static_cast<Eigen::Index>(i)] - all[i]));
            CHECK(worst <= 1e-8);
        }
        const Supercell& c2 = cubic_cell(2);
        CHECK(c2.fermi.n_occupied == 8);
        CHECK(c2.fermi.gap > 0.0);
    }

    TEST_CASE("zero charge leaves the host untouched")
    {
        const Supercell& cell = cubic_cell(2);
        DefectConfig none;
        none.charge = 0.0;
        ScfResult r = scf_solve(cell, none);
        CHECK(r.rho.norm() <= 1e-15);
        CHECK(std::abs(r.tr0) <= 1e-13);
        CHECK(r.converged);
    }

    TEST_CASE("SCF conserves the electron count and stays a projector")
    {
        const Supercell& cell = cubic_cell(2);
        DefectConfig d;
        ScfResult r = scf_solve(cell, d, anderson());
        REQUIRE(r.converged);
        CHECK(std::abs(r.tr0) <= 1e-8);
        CHECK(r.idempotence <= 1e-10);
        CHECK(std::abs(r.rho[0]) <= 1e-10 * r.rho.norm());
    }

    TEST_CASE("linear mixing residual decreases after the first iterations")
    {
        const Supercell& cell = cubic_cell(2);
        ScfOptions o;
        o.mix = 0.2;
        o.tol = 1e-9;
        ScfResult r = scf_solve(cell, DefectConfig{}, o);
        REQUIRE(r.converged);
        for (std::size_t i = 4; i < r.residual_history.size(); ++i)
            CHECK(r.residual_history[i] < r.residual_history[i - 1]);
    }

    TEST_CASE("linear mixing and Anderson mixing reach the same density")
    {
        const Supercell& cell = cubic_cell(2);
        ScfOptions lo;
        lo.tol = 1e-12;
        lo.max_iter = 500;
        ScfOptions ao = anderson();
        ao.tol = 1e-12;
        ScfResult lin = scf_solve(cell, DefectConfig{}, lo);
        ScfResult and_ = scf_solve(cell, DefectConfig{}, ao);
        REQUIRE(lin.converged);
        REQUIRE(and_.converged);
        CHECK(coulomb_norm(cell, lin.rho - and_.rho) <= 1e-6 * coulomb_norm(cell, lin.rho));
        CHECK(and_.iterations <= lin.iterations);
    }

    TEST_CASE("SCF approaches linear response as the charge shrinks")
    {
        const Supercell& cell = cubic_cell(2);
        double prev = 1.0;
        for (double z : {0.01, 0.005}) {
            DefectConfig d;
            d.charge = z;
            ScfResult scf = scf_solve(cell, d, anderson());
            ScfResult lr = linear_response_solve(cell, d);
            double dev = coulomb_norm(cell, scf.rho - lr.rho) / coulomb_norm(cell, lr.rho);
            CHECK(dev <= 0.05);
            CHECK(dev < prev);
            prev = dev;
        }
    }

    TEST_CASE("linear response is odd in the charge")
    {
        const Supercell& cell = cubic_cell(2);
        DefectConfig p, n;
        n.charge = -p.charge;
        ScfResult a = linear_response_solve(cell, p), b = linear_response_solve(cell, n);
        CHECK((a.rho + b.rho).norm() <= 1e-12 * a.rho.norm());
    }

    TEST_CASE("translating the defect by a host lattice vector translates the density")
    {
        const Supercell& cell = cubic_cell(2);
        DefectConfig d, t;
        t.center = Vec3(2.0 * kPi, 0.0, 0.0);
        ScfResult a = scf_solve(cell, d, anderson()), b = scf_solve(cell, t, anderson());
        const PlaneWaveBasis& dens = cell.host.density_basis;
        CVec shifted(a.rho.size());
        for (std::size_t g = 0; g < dens.size(); ++g)
            shifted[static_cast<Eigen::Index>(g)] = a.rho[static_cast<Eigen::Index>(g)] * std::polar(1.0, -dens.cart[g].dot(t.center));
        CHECK(coulomb_norm(cell, b.rho - shifted) <= 1e-6 * coulomb_norm(cell, a.rho));
    }

    TEST_CASE("no host electrons: the defect is not screened")
    {
        Supercell cell = cubic_cell(2);
        cell.fermi = vacuum_fermi(cell.host);
        cell.p0.setZero();
        cell.rho0.setZero();
        ScfResult r = linear_response_solve(cell, DefectConfig{});
        CHECK(r.rho.norm() == 0.0);
        CHECK(screening_diagnostic(r, ResponseMatrixL{}).ratio == doctest::Approx(1.0).epsilon(1e-14));
    }

    TEST_CASE("m = 2 screening ratio is near 1/(1 + L0) and isotropic")
    {
        const Supercell& cell = cubic_cell(2);
        const ResponseMatrixL& L = reference_L(false);
        ScfOptions o = anderson();
        o.tol = 1e-12;
        ScfResult r = scf_solve(cell, DefectConfig{}, o);
        ScreeningReport s = screening_diagnostic(r, L);
        CHECK(s.ratio < 1.0);
        CHECK(s.rel_deviation <= 0.10);
        CHECK(anisotropy_diagnostic(r, L).spread <= 1e-3);
        CHECK(s.ratio == doctest::Approx(0.906877793880693).epsilon(1e-8));
    }

    TEST_CASE("invalid supercell parameters are rejected")
    {
        CHECK_THROWS_AS(build_supercell(mathieu_model(Vec3(1, 1, 1)), 0, kGDef), ValidationError);
        DefectConfig d;
        d.width = 0.0;
        CHECK_THROWS_AS(defect_coefficients(cubic_cell(2), d), ValidationError);
    }
}

TEST_SUITE("defect_scf_sequence")
{
    TEST_CASE("screening improves with the supercell size")
    {
        const ResponseMatrixL& L = reference_L(false);
        double prev = 1.0;
        for (int m : {2, 3}) {
            ScreeningReport s = screening_diagnostic(scf_solve(cubic_cell(m), DefectConfig{}, anderson()), L);
            CHECK(s.rel_deviation < prev);
            prev = s.rel_deviation;
        }
    }

    TEST_CASE("anisotropic host: the axis splitting persists as m grows")
    {
        const ResponseMatrixL& L = reference_L(true);
        double prev = 0.0;
        for (int m : {2, 3}) {
            AnisotropyReport a = anisotropy_diagnostic(scf_solve(aniso_cell(m), DefectConfig{}, anderson()), L);
            CHECK(a.ratios[0] > a.ratios[1]);
            CHECK(std::abs(a.ratios[1] - a.ratios[2]) <= 1e-6);
            CHECK(a.spread >= 0.5 * prev);
            CHECK(a.max_rel_deviation <= 0.10);
            prev = a.spread;
        }
    }
}

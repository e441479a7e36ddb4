#include "support.hpp"

#include <Eigen/Eigenvalues>

using namespace rhf;
using namespace rhf::test;

namespace {

PeriodicDensity random_density(std::mt19937_64& rng, const BlochBands& bands, const Vec3& q)
{
    return {q, random_vector(rng, static_cast<Eigen::Index>(bands.density_basis.size()))};
}

Vec3 grid_q(const SmallCrystal& c, int i, int j, int k)
{
    const double n = c.bands.grid.n_per_dim;
    return c.model.lattice.from_frac(Vec3(i / n, j / n, k / n));
}

double rel(const CVec& a, const CVec& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

} // namespace

TEST_SUITE("linear_response")
{
    TEST_CASE("zero potential gives zero response")
    {
        const SmallCrystal& c = cubic();
        PeriodicDensity v{grid_q(c, 1, 0, 0), CVec::Zero(static_cast<Eigen::Index>(c.bands.density_basis.size()))};
        CHECK(apply_chi0(c.bands, c.fermi, v).coeff.norm() == 0.0);
        CHECK(apply_L(c.bands, c.fermi, v).coeff.norm() == 0.0);
        CHECK(q1v_density_contour(c.bands, c.fermi, v, make_contour(c.fermi)).coeff.norm() == 0.0);
    }

    TEST_CASE("response at q = 0 carries no net charge")
    {
        const SmallCrystal& c = cubic();
        std::mt19937_64 rng(3);
        FiberCoupling coupling(c.bands, c.fermi, Vec3::Zero());
        for (int t = 0; t < 20; ++t) {
            PeriodicDensity v = random_density(rng, c.bands, Vec3::Zero());
            CHECK(std::abs(apply_chi0(c.bands, c.fermi, coupling, v).coeff[0]) <= 1e-10 * v.coeff.norm());
        }
    }

    TEST_CASE("single plane-wave potential: sum over states equals contour quadrature")
    {
        const SmallCrystal& c = cubic();
        const PlaneWaveBasis& dens = c.bands.density_basis;
        ContourSpec contour = make_contour(c.fermi, contour_nodes_for(c.fermi, 1e-12));
        for (const Vec3& q : {Vec3(Vec3::Zero()), grid_q(c, 1, 0, 0), grid_q(c, 1, -1, 1), Vec3(0.07, -0.02, 0.11)}) {
            PeriodicDensity v{q, CVec::Zero(static_cast<Eigen::Index>(dens.size()))};
            v.coeff[dens.index_of({1, 0, 0})] = 1.0;
            PeriodicDensity sos = apply_chi0(c.bands, c.fermi, v);
            PeriodicDensity con = q1v_density_contour(c.bands, c.fermi, v, contour);
            CHECK(rel(con.coeff, sos.coeff) <= 1e-8);
        }
    }

    TEST_CASE("dense chi0 matrix agrees with the matrix-free apply")
    {
        const SmallCrystal& c = cubic();
        std::mt19937_64 rng(5);
        Vec3 q = grid_q(c, 0, 1, 1);
        FiberCoupling coupling(c.bands, c.fermi, q);
        CMat chi = chi0_matrix(c.bands, c.fermi, coupling);
        PeriodicDensity v = random_density(rng, c.bands, q);
        CHECK(rel(chi * v.coeff, apply_chi0(c.bands, c.fermi, coupling, v).coeff) < 1e-12);
        CHECK((chi - chi.adjoint()).norm() < 1e-12 * chi.norm());
        CHECK(Eigen::SelfAdjointEigenSolver<CMat>(chi).eigenvalues().maxCoeff() <= 1e-12 * chi.norm());
    }

    TEST_CASE("contour blocks have no occupied-occupied or empty-empty part")
    {
        const SmallCrystal& c = cubic();
        std::mt19937_64 rng(8);
        const int n = c.fermi.n_occupied;
        ContourSpec contour = make_contour(c.fermi);
        for (const Vec3& p : {grid_q(c, 1, 1, 0), Vec3(0.03, 0.05, -0.02)}) {
            FiberCoupling coupling(c.bands, c.fermi, p);
            for (std::size_t k = 0; k < coupling.pairs().size(); k += 7) {
                const Coupling& pair = coupling.pairs()[k];
                CMat w(static_cast<Eigen::Index>(pair.target->dim()), static_cast<Eigen::Index>(pair.source->dim()));
                for (Eigen::Index j = 0; j < w.cols(); ++j) w.col(j) = random_vector(rng, w.rows());
                CMat q = q1v_contour(c.model, pair, w, contour, c.fermi.fermi);
                CMat pt = pair.target->coef.leftCols(n) * pair.target->coef.leftCols(n).adjoint();
                CMat ps = pair.source->coef.leftCols(n) * pair.source->coef.leftCols(n).adjoint();
                CMat it = CMat::Identity(pt.rows(), pt.cols()) - pt, is = CMat::Identity(ps.rows(), ps.cols()) - ps;
                CHECK((pt * q * ps).norm() <= 1e-8 * w.norm());
                CHECK((it * q * is).norm() <= 1e-8 * w.norm());
                CHECK(q1v_contour(c.model, pair, CMat::Zero(w.rows(), w.cols()), contour, c.fermi.fermi).norm() == 0.0);
            }
        }
    }

    TEST_CASE("a contour that cuts the occupied bands is rejected")
    {
        const SmallCrystal& c = cubic();
        ContourSpec bad = make_contour(c.fermi);
        bad.radius *= 0.5;
        PeriodicDensity v{Vec3::Zero(), CVec::Ones(static_cast<Eigen::Index>(c.bands.density_basis.size()))};
        CHECK_THROWS_AS(q1v_density_contour(c.bands, c.fermi, v, bad), NumericalError);
    }

    TEST_CASE("L is non-negative and symmetric in the Coulomb pairing")
    {
        const SmallCrystal& c = cubic();
        std::mt19937_64 rng(13);
        const double vol = c.model.lattice.volume;
        for (const Vec3& q : {Vec3(Vec3::Zero()), grid_q(c, 1, 0, -1), Vec3(0.04, 0.01, 0.02)}) {
            FiberCoupling coupling(c.bands, c.fermi, q);
            for (int t = 0; t < 100; ++t) {
                PeriodicDensity r1 = random_density(rng, c.bands, q), r2 = random_density(rng, c.bands, q);
                PeriodicDensity l1 = apply_L(c.bands, c.fermi, coupling, r1);
                PeriodicDensity l2 = apply_L(c.bands, c.fermi, coupling, r2);
                cplx self = coulomb_inner(c.bands.density_basis, q, r1.coeff, l1.coeff, vol);
                double scale = std::abs(coulomb_inner(c.bands.density_basis, q, r1.coeff, r1.coeff, vol));
                CHECK(self.real() >= -1e-12 * scale);
                CHECK(std::abs(self.imag()) <= 1e-10 * scale);
                cplx a = coulomb_inner(c.bands.density_basis, q, l1.coeff, r2.coeff, vol);
                cplx b = coulomb_inner(c.bands.density_basis, q, r1.coeff, l2.coeff, vol);
                CHECK(std::abs(a - b) <= 1e-10 * scale);
            }
        }
    }

    TEST_CASE("L is linear")
    {
        const SmallCrystal& c = cubic();
        std::mt19937_64 rng(17);
        Vec3 q = grid_q(c, 1, 1, 1);
        FiberCoupling coupling(c.bands, c.fermi, q);
        PeriodicDensity r1 = random_density(rng, c.bands, q), r2 = random_density(rng, c.bands, q);
        cplx a(0.7, -0.2), b(-1.3, 0.4);
        PeriodicDensity mix{q, a * r1.coeff + b * r2.coeff};
        CVec lhs = apply_L(c.bands, c.fermi, coupling, mix).coeff;
        CVec rhs = a * apply_L(c.bands, c.fermi, coupling, r1).coeff + b * apply_L(c.bands, c.fermi, coupling, r2).coeff;
        CHECK(rel(lhs, rhs) <= 1e-12);
    }

    TEST_CASE("L of the cubic crystal is a multiple of the identity")
    {
        const SmallCrystal& c = cubic();
        CHECK(c.L.L0 > 1e-6);
        CHECK((c.L.L - c.L.L0 * Mat3::Identity()).norm() <= 1e-8 * c.L.L0);
        CHECK(c.L.L0 == doctest::Approx(0.04435394160659).epsilon(1e-10));
    }

    TEST_CASE("L of the anisotropic crystal separates the axes")
    {
        const SmallCrystal& a = aniso();
        Eigen::SelfAdjointEigenSolver<Mat3> es(a.L.L);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        CHECK(a.L.L(1, 1) - a.L.L(0, 0) > 1e-6);
        CHECK(std::abs(a.L.L(1, 1) - a.L.L(2, 2)) < 1e-12);
        CHECK(a.L.L(0, 0) == doctest::Approx(0.00601585527076578).epsilon(1e-10));
        CHECK(a.L.L(1, 1) == doctest::Approx(0.0363487478515921).epsilon(1e-10));
    }

    TEST_CASE("small-q response of a Gaussian density approaches s.L.s")
    {
        const SmallCrystal& c = cubic();
        MomentumDensity rho = gaussian_density(1.0, 4.0);
        const double eta = 1e-2 * c.model.lattice.b.col(0).norm();
        for (const Vec3& s : default_directions()) {
            PeriodicDensity f = bloch_fiber(c.bands, rho, eta * s);
            cplx ratio = apply_L(c.bands, c.fermi, f).coeff[0] / f.coeff[0];
            CHECK(std::abs(ratio / s.dot(c.L.L * s) - 1.0) <= 1e-3);
        }
    }

    TEST_CASE("B(q) is non-negative, even, and quadratic at small q")
    {
        const SmallCrystal& c = aniso();
        std::mt19937_64 rng(21);
        for (int t = 0; t < 6; ++t) {
            Vec3 q = random_point(rng, 0.45);
            double b = b_factor(c.bands, c.fermi, q);
            CHECK(b >= 0.0);
            CHECK(std::abs(b - b_factor(c.bands, c.fermi, -q)) <= 1e-10 * std::max(b, 1e-300) + 1e-14);
        }
        const double eta = 1e-2;
        for (const Vec3& s : default_directions())
            CHECK(std::abs(b_factor(c.bands, c.fermi, eta * s) / (eta * eta) / s.dot(c.L.L * s) - 1.0) <= 1e-3);
        CHECK_THROWS_AS(b_factor(c.bands, c.fermi, Vec3::UnitX()), ValidationError);
    }

    TEST_CASE("second-order density: zero, quadratic and decaying at small q")
    {
        const SmallCrystal& c = cubic();
        Vec3 q = 0.1 * Vec3::UnitX();
        MomentumDensity zero = [](const Vec3&) { return cplx(0.0); };
        CHECK(r2_density(c.bands, c.fermi, zero, q).coeff.norm() == 0.0);
        MomentumDensity rho = gaussian_density(1.0, 2.0), rho2 = gaussian_density(2.0, 2.0);
        CVec a = r2_density(c.bands, c.fermi, rho, q).coeff, b = r2_density(c.bands, c.fermi, rho2, q).coeff;
        CHECK(rel(b, 4.0 * a) <= 1e-10);
        double prev = 1e300;
        for (double eta : {0.2, 0.1, 0.05}) {
            double v = std::abs(r2_density(c.bands, c.fermi, rho, eta * Vec3::UnitX()).coeff[0]);
            CHECK(v < prev);
            prev = v;
        }
    }

    TEST_CASE("contour node estimate grows as the tolerance tightens")
    {
        const SmallCrystal& c = cubic();
        int a = contour_nodes_for(c.fermi, 1e-6), b = contour_nodes_for(c.fermi, 1e-12);
        CHECK(a >= 4);
        CHECK(b > a);
    }
}

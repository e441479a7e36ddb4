#include "rhf/lattice_basis.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace rhf;

namespace {

// 2 pi (A^{-1})^T by cofactors, A holding a_i as columns.
Mat3 cofactor_reciprocal(const Vec3& a1, const Vec3& a2, const Vec3& a3)
{
    const double det = a1.dot(a2.cross(a3));
    Mat3 b;
    b.col(0) = 2.0 * kPi * a2.cross(a3) / det;
    b.col(1) = 2.0 * kPi * a3.cross(a1) / det;
    b.col(2) = 2.0 * kPi * a1.cross(a2) / det;
    return b;
}

std::size_t brute_force_count(const Lattice& lat, double g)
{
    std::size_t n = 0;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j)
            for (int k = -3; k <= 3; ++k)
                if (lat.cart({i, j, k}).norm() <= g) ++n;
    return n;
}

} // namespace

TEST_SUITE("lattice_basis")
{
    TEST_CASE("cubic lattice of constant 2 pi is self-dual")
    {
        Lattice lat = cubic_lattice(2.0 * kPi);
        CHECK((lat.b - Mat3::Identity()).norm() < 1e-14);
        CHECK(lat.volume == doctest::Approx(std::pow(2.0 * kPi, 3)).epsilon(1e-14));
        CHECK(lat.inscribed_radius() == doctest::Approx(0.5));
    }

    TEST_CASE("unit direct vectors give reciprocal vectors 2 pi e_i")
    {
        Lattice lat = build_lattice(Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ());
        CHECK((lat.b - 2.0 * kPi * Mat3::Identity()).norm() < 1e-13);
    }

    TEST_CASE("skewed lattice matches the cofactor inverse-transpose")
    {
        Vec3 a1(1, 0, 0), a2(0.5, 1, 0), a3(0, 0, 1);
        Lattice lat = build_lattice(a1, a2, a3);
        CHECK((lat.b - cofactor_reciprocal(a1, a2, a3)).norm() < 1e-13);
        CHECK((lat.a.transpose() * lat.b - 2.0 * kPi * Mat3::Identity()).norm() < 1e-13);
        CHECK(lat.volume == doctest::Approx(1.0));
    }

    TEST_CASE("degenerate direct vectors are rejected")
    {
        CHECK_THROWS_AS(build_lattice(Vec3::UnitX(), Vec3::UnitX(), Vec3::UnitZ()), ValidationError);
    }

    TEST_CASE("basis counts against brute-force enumeration")
    {
        Lattice lat = cubic_lattice(2.0 * kPi);
        CHECK(enumerate_basis(lat, 1.0).size() == 7);
        CHECK(enumerate_basis(lat, 1.5).size() == 19);
        CHECK(enumerate_basis(lat, 1.5).size() == brute_force_count(lat, 1.5));
        CHECK(enumerate_basis(lat, 0.999).size() == 1);
        Lattice skew = build_lattice(Vec3(2.0 * kPi, 0, 0), Vec3(kPi, 2.0 * kPi, 0), Vec3(0, 0, 2.0 * kPi));
        for (double g : {0.9, 1.3, 1.7, 2.2}) CHECK(enumerate_basis(skew, g).size() == brute_force_count(skew, g));
    }

    TEST_CASE("bases are nested, ordered and bijectively indexed")
    {
        Lattice lat = build_lattice(Vec3(2.0 * kPi, 0, 0), Vec3(kPi, 2.0 * kPi, 0), Vec3(0, 0, 4.0));
        PlaneWaveBasis small = enumerate_basis(lat, 1.4), big = enumerate_basis(lat, 2.3);
        std::set<IVec3> big_set(big.kvecs.begin(), big.kvecs.end());
        for (const auto& k : small.kvecs) CHECK(big_set.count(k) == 1);
        for (std::size_t i = 0; i < big.size(); ++i) CHECK(big.index_of(big.kvecs[i]) == static_cast<int>(i));
        CHECK(big.index_of({40, 0, 0}) == -1);
        for (std::size_t i = 1; i < big.size(); ++i) {
            double a = big.cart[i - 1].norm(), b = big.cart[i].norm();
            CHECK(a <= b + 1e-12);
            if (std::abs(a - b) < 1e-12) CHECK(big.kvecs[i - 1] < big.kvecs[i]);
        }
        CHECK(big.kvecs.front() == IVec3{0, 0, 0});
    }

    TEST_CASE("shifted bases keep |q + K| inside the cutoff")
    {
        Lattice lat = cubic_lattice(2.0 * kPi);
        Vec3 q(0.3, -0.2, 0.1);
        PlaneWaveBasis b = enumerate_basis_around(lat, 2.0, q);
        std::size_t n = 0;
        for (int i = -3; i <= 3; ++i)
            for (int j = -3; j <= 3; ++j)
                for (int k = -3; k <= 3; ++k)
                    if ((q + lat.cart({i, j, k})).norm() <= 2.0) ++n;
        CHECK(b.size() == n);
        for (const auto& k : b.kvecs) CHECK((q + lat.cart(k)).norm() <= 2.0 + 1e-12);
    }

    TEST_CASE("small grids")
    {
        Lattice lat = cubic_lattice(2.0 * kPi);
        BzGrid g1 = bz_grid(lat, 1);
        REQUIRE(g1.size() == 1);
        CHECK(g1.points[0].norm() == 0.0);
        CHECK(g1.weight == 1.0);

        BzGrid g2 = bz_grid(lat, 2);
        REQUIRE(g2.size() == 8);
        CHECK(g2.weight == doctest::Approx(0.125));
        for (const Vec3& f : g2.frac)
            for (int d = 0; d < 3; ++d) CHECK((std::abs(f[d]) < 1e-15 || std::abs(std::abs(f[d]) - 0.5) < 1e-15));
    }

    TEST_CASE("n = 3 grid is closed under negation modulo the reciprocal lattice")
    {
        Lattice lat = build_lattice(Vec3(2.0 * kPi, 0, 0), Vec3(kPi, 2.0 * kPi, 0), Vec3(0, 0, 2.0 * kPi));
        BzGrid g = bz_grid(lat, 3);
        REQUIRE(g.size() == 27);
        std::set<std::array<long, 3>> fwd, neg;
        auto key = [](const Vec3& f) {
            std::array<long, 3> k;
            for (int d = 0; d < 3; ++d) {
                double r = f[d] - std::floor(f[d] + 1e-9);
                k[static_cast<std::size_t>(d)] = std::lround(r * 3.0) % 3;
            }
            return k;
        };
        for (const Vec3& f : g.frac) {
            fwd.insert(key(f));
            neg.insert(key(-f));
        }
        CHECK(fwd == neg);
        CHECK(fwd.size() == 27);
        for (const Vec3& f : g.frac) {
            auto hit = g.locate(-f + Vec3(2, -1, 0));
            REQUIRE(hit.has_value());
            Vec3 back = g.frac[static_cast<std::size_t>(hit->first)] + Vec3(hit->second[0], hit->second[1], hit->second[2]);
            CHECK((back - (-f + Vec3(2, -1, 0))).norm() < 1e-12);
        }
        CHECK_FALSE(g.locate(Vec3(0.1, 0, 0)).has_value());
    }

    TEST_CASE("grid averages are invariant under q -> -q")
    {
        Lattice lat = cubic_lattice(2.0 * kPi);
        for (int n : {2, 3, 4, 5}) {
            BzGrid g = bz_grid(lat, n);
            auto f = [&](const Vec3& q) {
                Vec3 x = lat.frac(q);
                return std::cos(2 * kPi * x[0]) + std::sin(2 * kPi * (x[1] + 2 * x[2])) + 0.3 * std::sin(2 * kPi * x[0]);
            };
            double a = 0.0, b = 0.0;
            for (const Vec3& q : g.points) {
                a += g.weight * f(q);
                b += g.weight * f(-q);
            }
            CHECK(a == doctest::Approx(b).epsilon(1e-13));
        }
    }
}

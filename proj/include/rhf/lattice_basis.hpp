#pragma once

#include "rhf/common.hpp"

#include <optional>

namespace rhf {

// Direct vectors a_i and reciprocal vectors b_i are stored as matrix columns.
struct Lattice {
    Mat3 a;
    Mat3 b;
    double volume = 0.0;

    Vec3 cart(const IVec3& m) const { return b * Vec3(m[0], m[1], m[2]); }
    // Coordinates of a momentum in the reciprocal basis.
    Vec3 frac(const Vec3& p) const { return a.transpose() * p / (2.0 * kPi); }
    Vec3 from_frac(const Vec3& f) const { return b * f; }
    // Radius of the largest ball centred at 0 inside the first Brillouin zone.
    double inscribed_radius() const;
};

Lattice build_lattice(const Vec3& a1, const Vec3& a2, const Vec3& a3);
Lattice cubic_lattice(double a);

// Dense lookup table from integer triples to positions.
class IndexBox {
public:
    IndexBox() = default;
    explicit IndexBox(const std::vector<IVec3>& keys);
    int find(const IVec3& m) const
    {
        int i0 = m[0] - lo_[0], i1 = m[1] - lo_[1], i2 = m[2] - lo_[2];
        if (i0 < 0 || i1 < 0 || i2 < 0 || i0 >= ext_[0] || i1 >= ext_[1] || i2 >= ext_[2]) return -1;
        return table_[(static_cast<std::size_t>(i0) * ext_[1] + i1) * ext_[2] + i2];
    }

private:
    IVec3 lo_{0, 0, 0};
    IVec3 ext_{0, 0, 0};
    std::vector<int> table_;
};

// Plane waves e^{i(center+K)x} with |center+K| <= g_max, ordered by
// (|center+K|, lexicographic K). For center = 0 this is the usual cutoff ball.
struct PlaneWaveBasis {
    double g_max = 0.0;
    Vec3 center = Vec3::Zero();
    std::vector<IVec3> kvecs;
    std::vector<Vec3> cart; // K (without the centre shift)
    IndexBox lookup;

    std::size_t size() const { return kvecs.size(); }
    int index_of(const IVec3& k) const { return lookup.find(k); }
};

PlaneWaveBasis enumerate_basis(const Lattice& lattice, double g_max, bool allow_trivial = true);
PlaneWaveBasis enumerate_basis_around(const Lattice& lattice, double g_max, const Vec3& center);

// Gamma-centred uniform grid, points reduced to f - floor(f + 1/2) per component.
struct BzGrid {
    int n_per_dim = 1;
    std::vector<Vec3> frac;
    std::vector<Vec3> points;
    double weight = 1.0;

    std::size_t size() const { return points.size(); }
    // Grid index of the point congruent to f (fractional) modulo the
    // reciprocal lattice, with the lattice shift f - frac[i].
    std::optional<std::pair<int, IVec3>> locate(const Vec3& f, double tol = 1e-9) const;
};

BzGrid bz_grid(const Lattice& lattice, int n_per_dim);

} // namespace rhf

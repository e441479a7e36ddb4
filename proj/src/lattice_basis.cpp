#include "rhf/lattice_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rhf {

double Lattice::inscribed_radius() const
{
    double best = std::numeric_limits<double>::max();
    for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j)
            for (int k = -2; k <= 2; ++k) {
                if (i == 0 && j == 0 && k == 0) continue;
                best = std::min(best, cart({i, j, k}).norm());
            }
    return 0.5 * best;
}

Lattice build_lattice(const Vec3& a1, const Vec3& a2, const Vec3& a3)
{
    Lattice lat;
    lat.a.col(0) = a1;
    lat.a.col(1) = a2;
    lat.a.col(2) = a3;
    double scale = std::max({a1.norm(), a2.norm(), a3.norm()});
    double det = lat.a.determinant();
    if (!(std::abs(det) >= 1e-12 * scale * scale * scale))
        throw ValidationError("build_lattice: singular lattice vectors");
    lat.volume = std::abs(det);
    // b_i = 2 pi (a_j x a_k) / det keeps a_i . b_j = 2 pi delta_ij.
    lat.b.col(0) = 2.0 * kPi * a2.cross(a3) / det;
    lat.b.col(1) = 2.0 * kPi * a3.cross(a1) / det;
    lat.b.col(2) = 2.0 * kPi * a1.cross(a2) / det;
    return lat;
}

Lattice cubic_lattice(double a)
{
    return build_lattice(Vec3(a, 0, 0), Vec3(0, a, 0), Vec3(0, 0, a));
}

IndexBox::IndexBox(const std::vector<IVec3>& keys)
{
    if (keys.empty()) return;
    IVec3 hi = keys.front();
    lo_ = keys.front();
    for (const auto& k : keys)
        for (int d = 0; d < 3; ++d) {
            lo_[d] = std::min(lo_[d], k[d]);
            hi[d] = std::max(hi[d], k[d]);
        }
    for (int d = 0; d < 3; ++d) ext_[d] = hi[d] - lo_[d] + 1;
    table_.assign(static_cast<std::size_t>(ext_[0]) * ext_[1] * ext_[2], -1);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& k = keys[i];
        table_[(static_cast<std::size_t>(k[0] - lo_[0]) * ext_[1] + (k[1] - lo_[1])) * ext_[2] + (k[2] - lo_[2])] =
            static_cast<int>(i);
    }
}

namespace {

PlaneWaveBasis sphere(const Lattice& lat, double g_max, const Vec3& center)
{
    const double reach = g_max * (1.0 + 1e-12);
    const double span = reach + center.norm();
    IVec3 lim;
    for (int d = 0; d < 3; ++d) lim[d] = static_cast<int>(std::ceil(lat.a.col(d).norm() * span / (2.0 * kPi))) + 1;

    struct Entry {
        long long key;
        IVec3 m;
    };
    std::vector<Entry> found;
    for (int i = -lim[0]; i <= lim[0]; ++i)
        for (int j = -lim[1]; j <= lim[1]; ++j)
            for (int k = -lim[2]; k <= lim[2]; ++k) {
                double len = (center + lat.cart({i, j, k})).norm();
                if (len <= reach) found.push_back({std::llround(len * 1e9), {i, j, k}});
            }
    std::sort(found.begin(), found.end(), [](const Entry& x, const Entry& y) {
        if (x.key != y.key) return x.key < y.key;
        return x.m < y.m;
    });

    PlaneWaveBasis basis;
    basis.g_max = g_max;
    basis.center = center;
    for (const auto& e : found) {
        basis.kvecs.push_back(e.m);
        basis.cart.push_back(lat.cart(e.m));
    }
    basis.lookup = IndexBox(basis.kvecs);
    return basis;
}

} // namespace

PlaneWaveBasis enumerate_basis(const Lattice& lattice, double g_max, bool allow_trivial)
{
    if (!(g_max > 0.0)) throw ValidationError("enumerate_basis: g_max must be positive");
    PlaneWaveBasis basis = sphere(lattice, g_max, Vec3::Zero());
    if (basis.size() == 1 && !allow_trivial)
        throw ValidationError("enumerate_basis: cutoff below the shortest reciprocal vector leaves only K = 0");
    return basis;
}

PlaneWaveBasis enumerate_basis_around(const Lattice& lattice, double g_max, const Vec3& center)
{
    if (!(g_max > 0.0)) throw ValidationError("enumerate_basis: g_max must be positive");
    PlaneWaveBasis basis = sphere(lattice, g_max, center);
    if (basis.size() == 0) throw ValidationError("enumerate_basis: empty plane-wave set");
    return basis;
}

std::optional<std::pair<int, IVec3>> BzGrid::locate(const Vec3& f, double tol) const
{
    const int n = n_per_dim;
    IVec3 m;
    for (int d = 0; d < 3; ++d) {
        double x = f[d] * n;
        double r = std::round(x);
        if (std::abs(x - r) > tol * n) return std::nullopt;
        long long v = static_cast<long long>(r) % n;
        if (v < 0) v += n;
        m[d] = static_cast<int>(v);
    }
    int idx = (m[0] * n + m[1]) * n + m[2];
    IVec3 shift;
    for (int d = 0; d < 3; ++d) shift[d] = static_cast<int>(std::llround(f[d] - frac[idx][d]));
    return std::make_pair(idx, shift);
}

BzGrid bz_grid(const Lattice& lattice, int n_per_dim)
{
    if (n_per_dim < 1) throw ValidationError("bz_grid: n_per_dim must be >= 1");
    BzGrid grid;
    grid.n_per_dim = n_per_dim;
    const int n = n_per_dim;
    grid.weight = 1.0 / (static_cast<double>(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Vec3 f(double(i) / n, double(j) / n, double(k) / n);
                for (int d = 0; d < 3; ++d) f[d] -= std::floor(f[d] + 0.5);
                grid.frac.push_back(f);
                grid.points.push_back(lattice.from_frac(f));
            }
    return grid;
}

} // namespace rhf

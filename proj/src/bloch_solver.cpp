#include "rhf/bloch_solver.hpp"

#include "rhf/linalg.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace rhf {

void CrystalModel::validate() const
{
    if (n_electrons < 1) throw ValidationError("crystal.n_electrons must be >= 1");
    for (const auto& [k, v] : v_fourier) {
        cplx partner = v_hat(-k);
        if (std::abs(partner - std::conj(v)) > 1e-12 * (1.0 + std::abs(v)))
            throw ValidationError("crystal potential is not real: V(-K) != conj(V(K))");
    }
}

CrystalModel mathieu_model(const Vec3& amplitudes, double a, int n_electrons, double v0)
{
    CrystalModel model;
    model.lattice = cubic_lattice(a);
    model.n_electrons = n_electrons;
    if (v0 != 0.0) model.v_fourier[{0, 0, 0}] = v0;
    for (int d = 0; d < 3; ++d) {
        if (amplitudes[d] == 0.0) continue;
        IVec3 e{0, 0, 0};
        e[d] = 1;
        model.v_fourier[e] = 0.5 * amplitudes[d];
        model.v_fourier[-e] = 0.5 * amplitudes[d];
    }
    return model;
}

CMat assemble_fiber(const CrystalModel& model, const Vec3& q, const PlaneWaveBasis& basis)
{
    const auto n = static_cast<Eigen::Index>(basis.size());
    CMat h = CMat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) h(i, i) = 0.5 * (q + basis.cart[i]).squaredNorm();
    // Walk the potential support instead of all pairs: O(n * |support|).
    for (const auto& [g, v] : model.v_fourier)
        for (Eigen::Index j = 0; j < n; ++j) {
            int i = basis.index_of(basis.kvecs[j] + g);
            if (i >= 0) h(i, j) += v;
        }
    return h;
}

namespace {

void fix_phases(CMat& c, const BandOptions& options, std::size_t tag)
{
    if (options.phase == PhaseConvention::LargestReal) {
        for (Eigen::Index n = 0; n < c.cols(); ++n) {
            Eigen::Index best = 0;
            double best_abs = -1.0;
            for (Eigen::Index i = 0; i < c.rows(); ++i) {
                double m = std::abs(c(i, n));
                if (m > best_abs * (1.0 + 1e-10) + 1e-300) {
                    best_abs = m;
                    best = i;
                }
            }
            cplx z = c(best, n);
            if (std::abs(z) > 0.0) c.col(n) *= std::conj(z) / std::abs(z);
        }
        return;
    }
    std::mt19937_64 rng(options.seed * 0x9E3779B97F4A7C15ULL + tag);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    for (Eigen::Index n = 0; n < c.cols(); ++n) c.col(n) *= std::polar(1.0, angle(rng));
}

} // namespace

Fiber diagonalize_fiber(const CrystalModel& model, const Vec3& q, std::shared_ptr<const PlaneWaveBasis> basis,
                        const BandOptions& options, std::size_t phase_tag)
{
    Fiber f;
    f.q = q;
    f.basis = std::move(basis);
    CMat h = assemble_fiber(model, q, *f.basis);
    EigenDecomposition ed;
    try {
        ed = hermitian_eigh(h);
    } catch (const NumericalError& e) {
        std::ostringstream os;
        os << "eigensolver failed at q = (" << q[0] << ", " << q[1] << ", " << q[2] << "): " << e.what();
        throw NumericalError(os.str());
    }
    f.eps = std::move(ed.values);
    f.coef = std::move(ed.vectors);
    fix_phases(f.coef, options, phase_tag);
    return f;
}

BlochBands solve_bands(const CrystalModel& model, const BzGrid& grid, const PlaneWaveBasis& basis,
                       const BandOptions& options)
{
    model.validate();
    BlochBands bands;
    bands.model = model;
    bands.grid = grid;
    bands.g_max = basis.g_max;
    bands.options = options;
    bands.density_basis = enumerate_basis(model.lattice, basis.g_max);
    bands.fibers.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        auto set = std::make_shared<const PlaneWaveBasis>(
            enumerate_basis_around(model.lattice, basis.g_max, grid.points[i]));
        bands.fibers[i] = diagonalize_fiber(model, grid.points[i], set, options, i);
    });
    return bands;
}

FermiData fermi_level(const BlochBands& bands, int n_electrons, double gap_tol)
{
    if (n_electrons < 1) throw ValidationError("fermi_level: N must be >= 1");
    FermiData fd;
    fd.sigma_plus = -std::numeric_limits<double>::infinity();
    fd.sigma_minus_next = std::numeric_limits<double>::infinity();
    fd.min_spectrum = std::numeric_limits<double>::infinity();
    for (const auto& f : bands.fibers) {
        if (f.eps.size() <= n_electrons)
            throw ValidationError("fermi_level: plane-wave set too small to hold N + 1 bands");
        fd.sigma_plus = std::max(fd.sigma_plus, f.eps[n_electrons - 1]);
        fd.sigma_minus_next = std::min(fd.sigma_minus_next, f.eps[n_electrons]);
        fd.min_spectrum = std::min(fd.min_spectrum, f.eps[0]);
    }
    fd.gap = fd.sigma_minus_next - fd.sigma_plus;
    fd.fermi = 0.5 * (fd.sigma_plus + fd.sigma_minus_next);
    fd.n_occupied = n_electrons;
    if (!(fd.gap > gap_tol)) {
        std::ostringstream os;
        os << "not an insulator: gap " << fd.gap << " <= gap_tol " << gap_tol;
        throw NumericalError(os.str());
    }
    return fd;
}

FermiData fermi_level(const BlochBands& bands, double gap_tol)
{
    return fermi_level(bands, bands.model.n_electrons, gap_tol);
}

FermiData vacuum_fermi(const BlochBands& bands)
{
    FermiData fd;
    fd.min_spectrum = std::numeric_limits<double>::infinity();
    for (const auto& f : bands.fibers) fd.min_spectrum = std::min(fd.min_spectrum, f.eps[0]);
    fd.sigma_plus = fd.min_spectrum - 2.0;
    fd.sigma_minus_next = fd.min_spectrum;
    fd.fermi = fd.min_spectrum - 1.0;
    fd.gap = 2.0;
    fd.n_occupied = 0;
    return fd;
}

CMat spectral_projector(const CMat& fiber, double fermi)
{
    EigenDecomposition ed = hermitian_eigh(fiber);
    Eigen::Index occ = 0;
    for (Eigen::Index i = 0; i < ed.values.size(); ++i) {
        if (std::abs(ed.values[i] - fermi) < 1e-10) throw NumericalError("eigenvalue at the Fermi level");
        if (ed.values[i] < fermi) occ = i + 1;
    }
    const CMat& c = ed.vectors;
    return c.leftCols(occ) * c.leftCols(occ).adjoint();
}

CVec periodic_density(const BlochBands& bands, const FermiData& fermi)
{
    return periodic_density(bands, fermi, bands.density_basis);
}

PlaneWaveBasis full_density_basis(const BlochBands& bands)
{
    return enumerate_basis(bands.model.lattice, 2.0 * bands.density_basis.g_max);
}

CVec periodic_density(const BlochBands& bands, const FermiData& fermi, const PlaneWaveBasis& dens)
{
    const double vol = bands.model.lattice.volume;
    std::vector<CVec> part(bands.fibers.size());
    parallel_for(bands.fibers.size(), [&](std::size_t q) {
        const Fiber& f = bands.fibers[q];
        CVec acc = CVec::Zero(static_cast<Eigen::Index>(dens.size()));
        for (std::size_t g = 0; g < dens.size(); ++g)
            for (std::size_t j = 0; j < f.dim(); ++j) {
                int i = f.basis->index_of(f.basis->kvecs[j] + dens.kvecs[g]);
                if (i < 0) continue;
                for (int n = 0; n < fermi.n_occupied; ++n) acc[g] += std::conj(f.coef(j, n)) * f.coef(i, n);
            }
        part[q] = acc;
    });
    CVec rho = CVec::Zero(static_cast<Eigen::Index>(dens.size()));
    for (const auto& p : part) rho += p;
    return rho * (bands.grid.weight / vol);
}

RVec sample_density(const PlaneWaveBasis& basis, const CVec& coeffs, const std::vector<Vec3>& points)
{
    RVec out(static_cast<Eigen::Index>(points.size()));
    for (std::size_t p = 0; p < points.size(); ++p) {
        cplx s = 0.0;
        for (std::size_t g = 0; g < basis.size(); ++g)
            s += coeffs[static_cast<Eigen::Index>(g)] * std::polar(1.0, basis.cart[g].dot(points[p]));
        out[static_cast<Eigen::Index>(p)] = s.real();
    }
    return out;
}

} // namespace rhf

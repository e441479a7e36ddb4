#include "rhf/defect_scf.hpp"

#include "rhf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rhf {

Supercell build_supercell(const CrystalModel& model, int m, double g_max, double gap_tol)
{
    if (m < 1) throw ValidationError("defect.m must be >= 1");
    model.validate();
    Supercell cell;
    cell.m = m;
    const Mat3& a = model.lattice.a;
    cell.model.lattice = build_lattice(m * a.col(0), m * a.col(1), m * a.col(2));
    cell.model.n_electrons = model.n_electrons * m * m * m;
    for (const auto& [k, v] : model.v_fourier) cell.model.v_fourier[{m * k[0], m * k[1], m * k[2]}] = v;

    PlaneWaveBasis basis = enumerate_basis(cell.model.lattice, g_max);
    cell.host = solve_bands(cell.model, bz_grid(cell.model.lattice, 1), basis);
    try {
        cell.fermi = fermi_level(cell.host, gap_tol);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("supercell basis too small: ") + e.what());
    }
    const Fiber& f = cell.host.fibers.front();
    auto occ = f.coef.leftCols(cell.fermi.n_occupied);
    cell.p0 = occ * occ.adjoint();
    cell.rho0 = periodic_density(cell.host, cell.fermi);

    const PlaneWaveBasis& dens = cell.host.density_basis;
    const auto d = static_cast<Eigen::Index>(f.dim());
    cell.diff.resize(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i)
            cell.diff(i, j) = dens.index_of(f.basis->kvecs[static_cast<std::size_t>(i)] -
                                            f.basis->kvecs[static_cast<std::size_t>(j)]);
    return cell;
}

CVec defect_coefficients(const Supercell& cell, const DefectConfig& defect)
{
    if (!(defect.width > 0.0)) throw ValidationError("defect.width must be positive");
    const PlaneWaveBasis& dens = cell.host.density_basis;
    CVec nu(static_cast<Eigen::Index>(dens.size()));
    const double w2 = defect.width * defect.width;
    for (std::size_t g = 0; g < dens.size(); ++g) {
        const Vec3& k = dens.cart[g];
        nu[static_cast<Eigen::Index>(g)] =
            defect.charge / cell.volume() * std::exp(-0.5 * w2 * k.squaredNorm()) * std::polar(1.0, -k.dot(defect.center));
    }
    return nu;
}

double coulomb_norm(const Supercell& cell, const CVec& r)
{
    return std::sqrt(std::abs(coulomb_inner(cell.host.density_basis, Vec3::Zero(), r, r, cell.volume())));
}

namespace {

// Density coefficients (1/Omega) sum_{G_i - G_j = G} X_ij.
CVec matrix_density(const Supercell& cell, const CMat& x)
{
    CVec r = CVec::Zero(static_cast<Eigen::Index>(cell.host.density_basis.size()));
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (cell.diff(i, j) >= 0) r[cell.diff(i, j)] += x(i, j);
    return r / cell.volume();
}

std::vector<RhoSample> shell_samples(const Supercell& cell, const CVec& nu, const CVec& rho)
{
    const PlaneWaveBasis& dens = cell.host.density_basis;
    std::vector<RhoSample> out;
    if (dens.size() < 2) return out;
    const double kmin = dens.cart[1].norm();
    for (std::size_t g = 1; g < dens.size() && dens.cart[g].norm() <= kmin * (1.0 + 1e-9); ++g)
        out.push_back({dens.cart[g], nu[static_cast<Eigen::Index>(g)], rho[static_cast<Eigen::Index>(g)]});
    return out;
}

struct Evaluation {
    CVec density;
    CMat gamma;
};

Evaluation evaluate(const Supercell& cell, const CVec& rho, const CVec& nu, const RVec& vc, double gap_tol)
{
    const Fiber& f = cell.host.fibers.front();
    CVec w = vc.cast<cplx>().cwiseProduct(rho - nu);
    CMat h = assemble_fiber(cell.model, f.q, *f.basis);
    for (Eigen::Index j = 0; j < h.cols(); ++j)
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            if (cell.diff(i, j) >= 0) h(i, j) += w[cell.diff(i, j)];
    const double ef = cell.fermi.fermi;
    EigenDecomposition ed = hermitian_eigh_below(h, ef + 10.0 * gap_tol);
    for (Eigen::Index i = 0; i < ed.values.size(); ++i)
        if (ed.values[i] > ef - 10.0 * gap_tol) throw NumericalError("eigenvalue at the Fermi level");
    if (ed.values.size() != cell.fermi.n_occupied) {
        std::ostringstream os;
        os << "eigenvalue at the Fermi level: " << ed.values.size() << " states below eps_F instead of "
           << cell.fermi.n_occupied << " (defect outside the small-defect regime)";
        throw NumericalError(os.str());
    }
    Evaluation ev;
    ev.gamma = ed.vectors * ed.vectors.adjoint();
    ev.density = matrix_density(cell, ev.gamma - cell.p0);
    return ev;
}

} // namespace

ScfResult scf_solve(const Supercell& cell, const DefectConfig& defect, const ScfOptions& options)
{
    if (!(options.mix > 0.0 && options.mix <= 1.0)) throw ValidationError("defect.mix must be in (0, 1]");
    if (!(options.tol > 0.0)) throw ValidationError("defect.tol must be positive");
    if (options.max_iter < 1) throw ValidationError("defect.max_iter must be >= 1");
    const PlaneWaveBasis& dens = cell.host.density_basis;
    const RVec vc = coulomb_multiplier(dens, Vec3::Zero());
    const CVec nu = defect_coefficients(cell, defect);
    const auto m = nu.size();

    ScfResult res;
    CVec rho = CVec::Zero(m);
    std::vector<CVec> hist_rho, hist_res;
    Evaluation ev;
    for (int it = 1; it <= options.max_iter; ++it) {
        ev = evaluate(cell, rho, nu, vc, options.gap_tol);
        CVec resid = ev.density - rho;
        CVec next;
        if (options.mixing == Mixing::Anderson && !hist_rho.empty()) {
            const auto depth = static_cast<Eigen::Index>(hist_rho.size());
            CMat dr(m, depth), dR(m, depth);
            for (Eigen::Index c = 0; c < depth; ++c) {
                dr.col(c) = rho - hist_rho[static_cast<std::size_t>(c)];
                dR.col(c) = resid - hist_res[static_cast<std::size_t>(c)];
            }
            // Least squares in the Coulomb metric.
            RVec sw = vc.cwiseSqrt();
            CMat a = sw.asDiagonal() * dR;
            CVec b = sw.cast<cplx>().cwiseProduct(resid);
            CVec gam = a.completeOrthogonalDecomposition().solve(b);
            CVec rbar = rho - dr * gam;
            CVec Rbar = resid - dR * gam;
            next = rbar + options.mix * Rbar;
        } else {
            next = rho + options.mix * resid;
        }
        if (options.mixing == Mixing::Anderson) {
            hist_rho.push_back(rho);
            hist_res.push_back(resid);
            if (static_cast<int>(hist_rho.size()) > options.anderson_depth) {
                hist_rho.erase(hist_rho.begin());
                hist_res.erase(hist_res.begin());
            }
        }
        double r = coulomb_norm(cell, next - rho);
        res.residual_history.push_back(r);
        res.iterations = it;
        rho = std::move(next);
        if (options.on_iteration) options.on_iteration(it, r);
        if (r <= options.tol) {
            res.converged = true;
            break;
        }
    }
    res.rho = rho;
    CMat diff = ev.gamma - cell.p0;
    res.tr0 = diff.trace().real();
    res.idempotence = (ev.gamma * ev.gamma - ev.gamma).norm();
    res.samples = shell_samples(cell, nu, rho);
    if (!res.converged) {
        std::ostringstream os;
        os << "SCF did not converge in " << options.max_iter << " iterations (last residual "
           << res.residual_history.back() << ")";
        throw NumericalError(os.str());
    }
    return res;
}

ScfResult linear_response_solve(const Supercell& cell, const DefectConfig& defect, double tol)
{
    const PlaneWaveBasis& dens = cell.host.density_basis;
    const RVec vc = coulomb_multiplier(dens, Vec3::Zero());
    const RVec vh = vc.cwiseSqrt();
    const CVec nu = defect_coefficients(cell, defect);
    const auto m = nu.size();
    FiberCoupling coupling(cell.host, cell.fermi, Vec3::Zero());

    // y = v^{1/2} rho; T = v^{1/2} L v^{-1/2} = -v^{1/2} chi0 v^{1/2} is Hermitian and >= 0.
    auto t_apply = [&](const CVec& y) {
        PeriodicDensity pot{Vec3::Zero(), vh.cast<cplx>().cwiseProduct(y)};
        return CVec(-vh.cast<cplx>().cwiseProduct(apply_chi0(cell.host, cell.fermi, coupling, pot).coeff));
    };
    const CVec b = t_apply(vh.cast<cplx>().cwiseProduct(nu));
    CVec y = CVec::Zero(m);
    CVec r = b;
    CVec p = r;
    double rr = r.squaredNorm();
    const double stop = tol * std::max(b.norm(), 1e-300);
    ScfResult res;
    for (int it = 0; it < 500 && std::sqrt(rr) > stop; ++it) {
        CVec ap = p + t_apply(p);
        cplx alpha = rr / p.dot(ap);
        y += alpha * p;
        r -= alpha * ap;
        double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
        res.iterations = it + 1;
        res.residual_history.push_back(std::sqrt(rr));
    }
    res.converged = std::sqrt(rr) <= stop;
    if (!res.converged) throw NumericalError("linear response solve did not converge");
    res.rho = CVec::Zero(m);
    for (Eigen::Index g = 0; g < m; ++g)
        if (vh[g] > 0.0) res.rho[g] = y[g] / vh[g];
    res.samples = shell_samples(cell, nu, res.rho);
    return res;
}

ScreeningReport screening_diagnostic(const ScfResult& result, const ResponseMatrixL& L)
{
    if (result.samples.empty()) throw ValidationError("screening_diagnostic: no shell samples");
    ScreeningReport rep;
    double s = 0.0;
    for (const auto& smp : result.samples) s += smp.screened_fraction();
    rep.ratio = s / static_cast<double>(result.samples.size());
    rep.predicted = 1.0 / (1.0 + L.L0);
    rep.rel_deviation = std::abs(rep.ratio - rep.predicted) / rep.predicted;
    return rep;
}

AnisotropyReport anisotropy_diagnostic(const ScfResult& result, const ResponseMatrixL& L)
{
    AnisotropyReport rep;
    for (int a = 0; a < 3; ++a) {
        double s = 0.0;
        int count = 0;
        for (const auto& smp : result.samples) {
            Vec3 dir = smp.k.normalized();
            if (std::abs(std::abs(dir[a]) - 1.0) < 1e-9) {
                s += smp.screened_fraction();
                ++count;
            }
        }
        if (count == 0) throw ValidationError("anisotropy_diagnostic: no shell sample along a lattice axis");
        rep.ratios[static_cast<std::size_t>(a)] = s / count;
        rep.predicted[static_cast<std::size_t>(a)] = 1.0 / (1.0 + L.L(a, a));
        rep.max_rel_deviation =
            std::max(rep.max_rel_deviation, std::abs(rep.ratios[static_cast<std::size_t>(a)] / rep.predicted[static_cast<std::size_t>(a)] - 1.0));
    }
    auto [lo, hi] = std::minmax_element(rep.ratios.begin(), rep.ratios.end());
    rep.spread = *hi - *lo;
    auto [plo, phi] = std::minmax_element(rep.predicted.begin(), rep.predicted.end());
    rep.predicted_spread = *phi - *plo;
    return rep;
}

} // namespace rhf

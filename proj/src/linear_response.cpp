#include "rhf/linear_response.hpp"

#include "rhf/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace rhf {

namespace {

void check_occupancy(const Fiber& f, const FermiData& fermi)
{
    const int n = fermi.n_occupied;
    const bool ok = f.eps.size() > n && (n == 0 || f.eps[n - 1] < fermi.fermi) && f.eps[n] > fermi.fermi;
    if (!ok) {
        std::ostringstream os;
        os << "auxiliary fiber at q = (" << f.q[0] << ", " << f.q[1] << ", " << f.q[2]
           << ") does not have exactly N states below the Fermi level";
        throw NumericalError(os.str());
    }
}

// W(i, j) = v[map(i, j)].
CMat coupling_matrix(const Eigen::MatrixXi& map, const CVec& v)
{
    CMat w = CMat::Zero(map.rows(), map.cols());
    for (Eigen::Index j = 0; j < map.cols(); ++j)
        for (Eigen::Index i = 0; i < map.rows(); ++i)
            if (map(i, j) >= 0) w(i, j) = v[map(i, j)];
    return w;
}

void scatter_density(const Eigen::MatrixXi& map, const CMat& q, CVec& out)
{
    for (Eigen::Index j = 0; j < map.cols(); ++j)
        for (Eigen::Index i = 0; i < map.rows(); ++i)
            if (map(i, j) >= 0) out[map(i, j)] += q(i, j);
}

// Sum-over-states Q_{1,V} block in plane-wave coordinates.
CMat q1v_sum_over_states(const Coupling& c, const CMat& w, int n_occ)
{
    const Fiber& t = *c.target;
    const Fiber& s = *c.source;
    const Eigen::Index nt = t.coef.cols() - n_occ, ns = s.coef.cols() - n_occ;
    auto to = t.coef.leftCols(n_occ), tu = t.coef.rightCols(nt);
    auto so = s.coef.leftCols(n_occ), su = s.coef.rightCols(ns);

    CMat x = to.adjoint() * w * su; // occupied target <- empty source
    for (Eigen::Index m = 0; m < ns; ++m)
        for (Eigen::Index n = 0; n < n_occ; ++n) x(n, m) /= t.eps[n] - s.eps[n_occ + m];
    CMat y = tu.adjoint() * (w * so); // empty target <- occupied source
    for (Eigen::Index n = 0; n < n_occ; ++n)
        for (Eigen::Index m = 0; m < nt; ++m) y(m, n) /= s.eps[n] - t.eps[n_occ + m];
    return to * (x * su.adjoint()) + (tu * y) * so.adjoint();
}

} // namespace

FiberCoupling::FiberCoupling(const BlochBands& bands, const FermiData& fermi, const Vec3& p) : p_(p)
{
    const Lattice& lat = bands.model.lattice;
    const std::size_t nf = bands.fibers.size();
    pairs_.resize(nf);
    auto probe = bands.grid.locate(lat.frac(bands.fibers[0].q + p));
    on_grid_ = probe.has_value();
    if (on_grid_) {
        for (std::size_t s = 0; s < nf; ++s) {
            const Fiber& src = bands.fibers[s];
            auto hit = bands.grid.locate(lat.frac(src.q + p));
            if (!hit) throw NumericalError("FiberCoupling: inconsistent grid location");
            pairs_[s] = {&bands.fibers[static_cast<std::size_t>(hit->first)], &src, -hit->second};
        }
        return;
    }
    aux_.resize(nf);
    parallel_for(nf, [&](std::size_t s) {
        const Fiber& src = bands.fibers[s];
        aux_[s] = std::make_unique<Fiber>(diagonalize_fiber(bands.model, src.q + p, src.basis, bands.options, s));
        check_occupancy(*aux_[s], fermi);
    });
    for (std::size_t s = 0; s < nf; ++s) pairs_[s] = {aux_[s].get(), &bands.fibers[s], {0, 0, 0}};
}

Eigen::MatrixXi pair_map(const Coupling& c, const PlaneWaveBasis& dens)
{
    const PlaneWaveBasis& bt = *c.target->basis;
    const PlaneWaveBasis& bs = *c.source->basis;
    Eigen::MatrixXi map(static_cast<Eigen::Index>(bt.size()), static_cast<Eigen::Index>(bs.size()));
    for (std::size_t j = 0; j < bs.size(); ++j)
        for (std::size_t i = 0; i < bt.size(); ++i)
            map(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                dens.index_of(bt.kvecs[i] - bs.kvecs[j] + c.g0);
    return map;
}

PeriodicDensity apply_chi0(const BlochBands& bands, const FermiData& fermi, const FiberCoupling& coupling,
                           const PeriodicDensity& v)
{
    const PlaneWaveBasis& dens = bands.density_basis;
    const auto m = static_cast<Eigen::Index>(dens.size());
    if (v.coeff.size() != m) throw ValidationError("apply_chi0: coefficient vector does not match the density basis");
    const auto& pairs = coupling.pairs();
    std::vector<CVec> part(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        Eigen::MatrixXi map = pair_map(pairs[k], dens);
        CMat q = q1v_sum_over_states(pairs[k], coupling_matrix(map, v.coeff), fermi.n_occupied);
        part[k] = CVec::Zero(m);
        scatter_density(map, q, part[k]);
    });
    PeriodicDensity out{v.q, CVec::Zero(m)};
    for (const auto& p : part) out.coeff += p;
    out.coeff *= bands.grid.weight / bands.model.lattice.volume;
    return out;
}

PeriodicDensity apply_chi0(const BlochBands& bands, const FermiData& fermi, const PeriodicDensity& v)
{
    FiberCoupling coupling(bands, fermi, v.q);
    return apply_chi0(bands, fermi, coupling, v);
}

CMat chi0_matrix(const BlochBands& bands, const FermiData& fermi, const FiberCoupling& coupling)
{
    const PlaneWaveBasis& dens = bands.density_basis;
    const auto m = static_cast<Eigen::Index>(dens.size());
    const int n_occ = fermi.n_occupied;
    const auto& pairs = coupling.pairs();
    std::vector<CMat> part(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        const Coupling& c = pairs[k];
        const Fiber& t = *c.target;
        const Fiber& s = *c.source;
        const PlaneWaveBasis& bt = *t.basis;
        const PlaneWaveBasis& bs = *s.basis;
        const Eigen::Index nt = t.coef.cols() - n_occ, ns = s.coef.cols() - n_occ;
        CMat chi = CMat::Zero(m, m);

        // Pair densities of (occupied target, empty source) at each G.
        for (int n = 0; n < n_occ; ++n) {
            CMat z = CMat::Zero(m, static_cast<Eigen::Index>(bs.size()));
            for (std::size_t g = 0; g < dens.size(); ++g)
                for (std::size_t j = 0; j < bs.size(); ++j) {
                    int i = bt.index_of(bs.kvecs[j] + dens.kvecs[g] - c.g0);
                    if (i >= 0) z(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j)) = t.coef(i, n);
                }
            CMat p = z * s.coef.rightCols(ns).conjugate();
            CMat pd = p;
            for (Eigen::Index b = 0; b < ns; ++b) pd.col(b) /= t.eps[n] - s.eps[n_occ + b];
            chi.noalias() += pd * p.adjoint();
        }
        // Pair densities of (empty target, occupied source).
        for (int n = 0; n < n_occ; ++n) {
            CMat tm = CMat::Zero(m, static_cast<Eigen::Index>(bt.size()));
            for (std::size_t g = 0; g < dens.size(); ++g)
                for (std::size_t i = 0; i < bt.size(); ++i) {
                    int j = bs.index_of(bt.kvecs[i] - dens.kvecs[g] + c.g0);
                    if (j >= 0)
                        tm(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i)) = std::conj(s.coef(j, n));
                }
            CMat p = tm * t.coef.rightCols(nt);
            CMat pd = p;
            for (Eigen::Index b = 0; b < nt; ++b) pd.col(b) /= s.eps[n] - t.eps[n_occ + b];
            chi.noalias() += pd * p.adjoint();
        }
        part[k] = std::move(chi);
    });
    CMat chi = CMat::Zero(m, m);
    for (const auto& p : part) chi += p;
    return chi * (bands.grid.weight / bands.model.lattice.volume);
}

RVec coulomb_multiplier(const PlaneWaveBasis& dens, const Vec3& q)
{
    RVec out(static_cast<Eigen::Index>(dens.size()));
    for (std::size_t g = 0; g < dens.size(); ++g) {
        double k2 = (q + dens.cart[g]).squaredNorm();
        out[static_cast<Eigen::Index>(g)] = k2 < 1e-28 ? 0.0 : 4.0 * kPi / k2;
    }
    return out;
}

cplx coulomb_inner(const PlaneWaveBasis& dens, const Vec3& q, const CVec& f, const CVec& g, double volume)
{
    RVec vc = coulomb_multiplier(dens, q);
    cplx s = 0.0;
    for (Eigen::Index i = 0; i < vc.size(); ++i) s += std::conj(f[i]) * vc[i] * g[i];
    return volume * s;
}

PeriodicDensity apply_L(const BlochBands& bands, const FermiData& fermi, const FiberCoupling& coupling,
                        const PeriodicDensity& rho)
{
    PeriodicDensity v{rho.q, coulomb_multiplier(bands.density_basis, rho.q).cast<cplx>().cwiseProduct(rho.coeff)};
    PeriodicDensity out = apply_chi0(bands, fermi, coupling, v);
    out.coeff = -out.coeff;
    return out;
}

PeriodicDensity apply_L(const BlochBands& bands, const FermiData& fermi, const PeriodicDensity& rho)
{
    FiberCoupling coupling(bands, fermi, rho.q);
    return apply_L(bands, fermi, coupling, rho);
}

ResponseMatrixL response_matrix_L(const BlochBands& bands, const FermiData& fermi)
{
    const int n_occ = fermi.n_occupied;
    std::vector<Mat3> part(bands.fibers.size());
    parallel_for(bands.fibers.size(), [&](std::size_t k) {
        const Fiber& f = bands.fibers[k];
        const Eigen::Index nu = f.coef.cols() - n_occ;
        auto cu = f.coef.rightCols(nu);
        Mat3 acc = Mat3::Zero();
        for (int n = 0; n < n_occ; ++n) {
            // Matrix elements <(e_a . grad) u_n, u_n'> for a = 1..3.
            CMat mel(3, nu);
            for (int a = 0; a < 3; ++a) {
                CVec d(static_cast<Eigen::Index>(f.dim()));
                for (std::size_t i = 0; i < f.dim(); ++i)
                    d[static_cast<Eigen::Index>(i)] = cplx(0.0, f.basis->cart[i][a]) * f.coef(i, n);
                mel.row(a) = (d.adjoint() * cu).eval();
            }
            for (Eigen::Index b = 0; b < nu; ++b) {
                double de = f.eps[n_occ + b] - f.eps[n];
                double w = 1.0 / (de * de * de);
                for (int a1 = 0; a1 < 3; ++a1)
                    for (int a2 = 0; a2 < 3; ++a2) acc(a1, a2) += w * std::real(std::conj(mel(a1, b)) * mel(a2, b));
            }
        }
        part[k] = acc;
    });
    ResponseMatrixL out;
    for (const auto& p : part) out.L += p;
    out.L *= 8.0 * kPi / bands.model.lattice.volume * bands.grid.weight;
    out.L = 0.5 * (out.L + out.L.transpose()).eval();
    out.L0 = out.L.trace() / 3.0;
    return out;
}

double b_factor(const BlochBands& bands, const FermiData& fermi, const Vec3& q)
{
    Vec3 f = bands.model.lattice.frac(q);
    if ((f - f.array().round().matrix()).cwiseAbs().maxCoeff() < 1e-12)
        throw ValidationError("b_factor: q lies on the reciprocal lattice");
    const int n_occ = fermi.n_occupied;
    FiberCoupling coupling(bands, fermi, -q);
    const auto& pairs = coupling.pairs();
    std::vector<double> part(pairs.size(), 0.0);
    parallel_for(pairs.size(), [&](std::size_t k) {
        const Coupling& c = pairs[k];
        const Fiber& t = *c.target;
        const Fiber& s = *c.source;
        // Overlaps <u_{n', q'-q}, u_{n, q'}>: plane waves with K_t + g0 = K_s.
        double acc = 0.0;
        for (int n = 0; n < n_occ; ++n)
            for (Eigen::Index b = n_occ; b < t.coef.cols(); ++b) {
                cplx ov = 0.0;
                for (std::size_t j = 0; j < s.dim(); ++j) {
                    int i = t.basis->index_of(s.basis->kvecs[j] - c.g0);
                    if (i >= 0) ov += std::conj(t.coef(i, b)) * s.coef(static_cast<Eigen::Index>(j), n);
                }
                acc += std::norm(ov) / (t.eps[b] - s.eps[n]);
            }
        part[k] = acc;
    });
    double total = 0.0;
    for (double p : part) total += p;
    return 8.0 * kPi / bands.model.lattice.volume * bands.grid.weight * total;
}

ContourSpec make_contour(const FermiData& fermi, int n_nodes)
{
    if (n_nodes < 4) throw ValidationError("contour: n_nodes must be >= 4");
    ContourSpec c;
    c.center = 0.5 * (fermi.min_spectrum + fermi.fermi);
    c.radius = 0.5 * (fermi.fermi - fermi.min_spectrum) + 0.25 * fermi.gap;
    c.n_nodes = n_nodes;
    return c;
}

int contour_nodes_for(const FermiData& fermi, double tol)
{
    ContourSpec c = make_contour(fermi, 4);
    const double d = 0.25 * fermi.gap;
    double rate = std::max(c.radius / (c.radius + d), (c.radius - d) / c.radius);
    return std::max(4, static_cast<int>(std::ceil(std::log(tol) / std::log(rate))));
}

namespace {

struct Tridiagonal {
    CMat q;
    RVec diag;
    RVec sub;
};

Tridiagonal tridiagonalize(const CMat& h)
{
    Eigen::Tridiagonalization<CMat> tri(h);
    return {tri.matrixQ(), tri.diagonal(), tri.subDiagonal()};
}

void check_contour(const RVec& eps, const ContourSpec& contour, double fermi)
{
    for (Eigen::Index i = 0; i < eps.size(); ++i) {
        double dist = std::abs(eps[i] - contour.center.real());
        bool inside = dist < contour.radius;
        if (std::abs(dist - contour.radius) < 1e-12 * (1.0 + contour.radius))
            throw NumericalError("contour touches the spectrum");
        if (inside != (eps[i] <= fermi))
            throw NumericalError("contour does not enclose exactly the occupied states");
    }
}

CMat contour_block(const Tridiagonal& tt, const Tridiagonal& ts, const CMat& w, const ContourSpec& contour)
{
    // In the tridiagonal frames: Q = Qt [sum_j c_j (z_j - Tt)^{-1} W' (z_j - Ts)^{-1}] Qs^H.
    const CMat wt = tt.q.adjoint() * w * ts.q;
    CMat acc = CMat::Zero(w.rows(), w.cols());
    const int n = contour.n_nodes;
    for (int j = 0; j < n; ++j) {
        cplx e = std::polar(1.0, 2.0 * kPi * (j + 0.5) / n);
        cplx z = contour.center + contour.radius * e;
        CMat x = wt;
        shifted_tridiagonal_solve(z, tt.diag, tt.sub, x);
        CMat y = x.transpose();
        shifted_tridiagonal_solve(z, ts.diag, ts.sub, y);
        acc += (contour.radius * e / static_cast<double>(n)) * y.transpose();
    }
    return tt.q * acc * ts.q.adjoint();
}

} // namespace

CMat q1v_contour(const CrystalModel& model, const Coupling& c, const CMat& w, const ContourSpec& contour,
                 double fermi)
{
    check_contour(c.target->eps, contour, fermi);
    check_contour(c.source->eps, contour, fermi);
    Tridiagonal tt = tridiagonalize(assemble_fiber(model, c.target->q, *c.target->basis));
    Tridiagonal ts = tridiagonalize(assemble_fiber(model, c.source->q, *c.source->basis));
    return contour_block(tt, ts, w, contour);
}

PeriodicDensity q1v_density_contour(const BlochBands& bands, const FermiData& fermi, const PeriodicDensity& v,
                                    const ContourSpec& contour)
{
    const PlaneWaveBasis& dens = bands.density_basis;
    const auto m = static_cast<Eigen::Index>(dens.size());
    FiberCoupling coupling(bands, fermi, v.q);
    const auto& pairs = coupling.pairs();
    std::vector<CVec> part(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        Eigen::MatrixXi map = pair_map(pairs[k], dens);
        CMat q = q1v_contour(bands.model, pairs[k], coupling_matrix(map, v.coeff), contour, fermi.fermi);
        part[k] = CVec::Zero(m);
        scatter_density(map, q, part[k]);
    });
    PeriodicDensity out{v.q, CVec::Zero(m)};
    for (const auto& p : part) out.coeff += p;
    out.coeff *= bands.grid.weight / bands.model.lattice.volume;
    return out;
}

PeriodicDensity bloch_fiber(const BlochBands& bands, const MomentumDensity& rho, const Vec3& q)
{
    const PlaneWaveBasis& dens = bands.density_basis;
    const double scale = std::pow(2.0 * kPi, 1.5) / bands.model.lattice.volume;
    PeriodicDensity out{q, CVec(static_cast<Eigen::Index>(dens.size()))};
    for (std::size_t g = 0; g < dens.size(); ++g) out.coeff[static_cast<Eigen::Index>(g)] = scale * rho(q + dens.cart[g]);
    return out;
}

MomentumDensity gaussian_density(double charge, double width)
{
    const double pref = charge * std::pow(2.0 * kPi, -1.5);
    return [pref, width](const Vec3& k) { return cplx(pref * std::exp(-0.5 * width * width * k.squaredNorm())); };
}

namespace {

// Matrix of V = rho * |x|^{-1} between the plane waves of two fibers.
CMat potential_block(const Fiber& a, const Fiber& b, const MomentumDensity& rho, double volume)
{
    const double scale = std::pow(2.0 * kPi, 1.5) / volume * 4.0 * kPi;
    CMat v(static_cast<Eigen::Index>(a.dim()), static_cast<Eigen::Index>(b.dim()));
    for (std::size_t j = 0; j < b.dim(); ++j)
        for (std::size_t i = 0; i < a.dim(); ++i) {
            Vec3 p = a.q + a.basis->cart[i] - b.q - b.basis->cart[j];
            double p2 = p.squaredNorm();
            v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                p2 < 1e-28 ? cplx(0.0) : scale * rho(p) / p2;
        }
    return v;
}

// Fiber q of the density of P^- V P^+ V P^+ (occupied on the left).
CVec r2_term(const BlochBands& bands, const FermiData& fermi, const MomentumDensity& rho, const Vec3& q)
{
    const PlaneWaveBasis& dens = bands.density_basis;
    const auto m = static_cast<Eigen::Index>(dens.size());
    const int n_occ = fermi.n_occupied;
    const double vol = bands.model.lattice.volume;
    FiberCoupling coupling(bands, fermi, -q); // x = aux fiber at q_a - q with q_a's plane waves
    const auto& pairs = coupling.pairs();
    std::vector<CVec> part(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        const Fiber& a = *pairs[k].source;
        const Fiber& x = *pairs[k].target;
        const IVec3 g0 = pairs[k].g0;
        const Eigen::Index nux = x.coef.cols() - n_occ;
        auto xu = x.coef.rightCols(nux);
        CVec acc_k = CVec::Zero(m);
        std::vector<CMat> var(bands.fibers.size()), vrx(bands.fibers.size());
        for (std::size_t r = 0; r < bands.fibers.size(); ++r) {
            var[r] = potential_block(a, bands.fibers[r], rho, vol);
            vrx[r] = potential_block(bands.fibers[r], x, rho, vol);
        }
        for (int n = 0; n < n_occ; ++n) {
            const double en = a.eps[n];
            Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(x.dim()));
            for (std::size_t r = 0; r < bands.fibers.size(); ++r) {
                const Fiber& fr = bands.fibers[r];
                const Eigen::Index nur = fr.coef.cols() - n_occ;
                auto ru = fr.coef.rightCols(nur);
                Eigen::RowVectorXcd s = a.coef.col(n).adjoint() * var[r] * ru;
                for (Eigen::Index b = 0; b < nur; ++b) s[b] /= en - fr.eps[n_occ + b];
                acc += (s * ru.adjoint()) * vrx[r];
            }
            Eigen::RowVectorXcd t = acc * xu;
            for (Eigen::Index b = 0; b < nux; ++b) t[b] /= en - x.eps[n_occ + b];
            t = (t * xu.adjoint()).eval();
            // |a_n><x_m'| has density at momentum q; component K pairs K_a with K_x = K_a - K - g0.
            for (std::size_t g = 0; g < dens.size(); ++g) {
                cplx sk = 0.0;
                for (std::size_t j = 0; j < a.dim(); ++j) {
                    int l = x.basis->index_of(a.basis->kvecs[j] - dens.kvecs[g] - g0);
                    if (l >= 0) sk += t[l] * a.coef(static_cast<Eigen::Index>(j), n);
                }
                acc_k[static_cast<Eigen::Index>(g)] += sk;
            }
        }
        part[k] = std::move(acc_k);
    });
    CVec out = CVec::Zero(m);
    for (const auto& p : part) out += p;
    return out * (bands.grid.weight * bands.grid.weight / vol);
}

} // namespace

PeriodicDensity r2_density(const BlochBands& bands, const FermiData& fermi, const MomentumDensity& rho,
                           const Vec3& q)
{
    const PlaneWaveBasis& dens = bands.density_basis;
    CVec plus = r2_term(bands, fermi, rho, q);
    CVec minus = r2_term(bands, fermi, rho, -q);
    PeriodicDensity out{q, plus};
    // Adjoint term: its fiber q, component K equals conj of the -q fiber at -K.
    for (std::size_t g = 0; g < dens.size(); ++g) {
        int mg = dens.index_of(-dens.kvecs[g]);
        if (mg >= 0) out.coeff[static_cast<Eigen::Index>(g)] += std::conj(minus[mg]);
    }
    return out;
}

} // namespace rhf

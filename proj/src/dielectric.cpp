#include "rhf/dielectric.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace rhf {

namespace {

void require_off_lattice(const Lattice& lat, const Vec3& q, const char* who)
{
    Vec3 f = lat.frac(q);
    if ((f - f.array().round().matrix()).cwiseAbs().maxCoeff() < 1e-12)
        throw ValidationError(std::string(who) + ": q lies on the reciprocal lattice");
}

RVec sqrt_coulomb(const PlaneWaveBasis& dens, const Vec3& q)
{
    RVec out(static_cast<Eigen::Index>(dens.size()));
    for (std::size_t g = 0; g < dens.size(); ++g)
        out[static_cast<Eigen::Index>(g)] = std::sqrt(4.0 * kPi) / (q + dens.cart[g]).norm();
    return out;
}

} // namespace

DielectricBlochMatrix epsilon_tilde(const BlochBands& bands, const FermiData& fermi, const Vec3& q)
{
    require_off_lattice(bands.model.lattice, q, "epsilon_tilde");
    FiberCoupling coupling(bands, fermi, q);
    CMat chi = chi0_matrix(bands, fermi, coupling);
    RVec v = sqrt_coulomb(bands.density_basis, q);
    DielectricBlochMatrix out;
    out.q = q;
    out.matrix = -(v.asDiagonal() * chi * v.asDiagonal());
    out.matrix.diagonal().array() += 1.0;
    return out;
}

double inverse_head(const BlochBands& bands, const FermiData& fermi, const Vec3& q, double tol)
{
    require_off_lattice(bands.model.lattice, q, "inverse_head");
    FiberCoupling coupling(bands, fermi, q);
    const RVec v = sqrt_coulomb(bands.density_basis, q);
    auto apply = [&](const CVec& x) {
        PeriodicDensity pot{q, v.cast<cplx>().cwiseProduct(x)};
        CVec r = apply_chi0(bands, fermi, coupling, pot).coeff;
        return CVec(x - v.cast<cplx>().cwiseProduct(r));
    };
    const auto m = v.size();
    CVec b = CVec::Zero(m);
    b[0] = 1.0;
    CVec x = CVec::Zero(m);
    CVec r = b;
    CVec p = r;
    double rr = r.squaredNorm();
    for (int it = 0; it < 500 && std::sqrt(rr) > tol; ++it) {
        CVec ap = apply(p);
        cplx alpha = rr / p.dot(ap);
        x += alpha * p;
        r -= alpha * ap;
        double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    if (std::sqrt(rr) > tol) throw NumericalError("inverse_head: conjugate gradient did not converge");
    return x[0].real();
}

HeadLimitData head_limit_data(const BlochBands& bands, const FermiData& fermi, const std::vector<Vec3>& directions)
{
    if (directions.size() < 3) throw ValidationError("head_limit_data: needs at least 3 directions");
    Eigen::MatrixXd dirs(static_cast<Eigen::Index>(directions.size()), 3);
    for (std::size_t i = 0; i < directions.size(); ++i) dirs.row(static_cast<Eigen::Index>(i)) = directions[i].transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dirs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto sv = svd.singularValues();
    if (!(sv[2] > 1e-6 * sv[0])) throw ValidationError("head_limit_data: directions are not linearly independent");

    const PlaneWaveBasis& dens = bands.density_basis;
    const auto m = static_cast<Eigen::Index>(dens.size());
    const double vol = bands.model.lattice.volume;
    const int n_occ = fermi.n_occupied;
    const std::size_t nd = directions.size();

    HeadLimitData out;
    out.directions = directions;
    for (std::size_t g = 1; g < dens.size(); ++g) out.nonzero.push_back(static_cast<int>(g));
    const auto nz = static_cast<Eigen::Index>(out.nonzero.size());
    RVec g0h = RVec::Zero(m);
    for (Eigen::Index g = 1; g < m; ++g) g0h[g] = std::sqrt(4.0 * kPi) / dens.cart[static_cast<std::size_t>(g)].norm();

    struct Part {
        CMat c;
        CMat on; // m x nd
    };
    std::vector<Part> part(bands.fibers.size());
    parallel_for(bands.fibers.size(), [&](std::size_t k) {
        const Fiber& f = bands.fibers[k];
        const auto d = static_cast<Eigen::Index>(f.dim());
        const Eigen::Index nu = f.coef.cols() - n_occ;
        auto cu = f.coef.rightCols(nu);
        Part p{CMat::Zero(m, m), CMat::Zero(m, nd)};
        for (int n = 0; n < n_occ; ++n) {
            // A(i, G) = c_n(K_i - G): multiplication by e^{iGx} in this fiber.
            CMat a = CMat::Zero(d, m);
            for (Eigen::Index g = 0; g < m; ++g)
                for (Eigen::Index i = 0; i < d; ++i) {
                    int j = f.basis->index_of(f.basis->kvecs[static_cast<std::size_t>(i)] -
                                              dens.kvecs[static_cast<std::size_t>(g)]);
                    if (j >= 0) a(i, g) = f.coef(j, n);
                }
            RVec inv1(nu), inv2(nu);
            for (Eigen::Index b = 0; b < nu; ++b) {
                double de = f.eps[n_occ + b] - f.eps[n];
                inv1[b] = 1.0 / de;
                inv2[b] = 1.0 / (de * de);
            }
            CMat cua = cu.adjoint() * a; // nu x m
            p.c.noalias() += cua.adjoint() * inv1.asDiagonal() * cua;
            CMat kgrad(d, static_cast<Eigen::Index>(nd));
            for (std::size_t s = 0; s < nd; ++s)
                for (Eigen::Index i = 0; i < d; ++i)
                    kgrad(i, static_cast<Eigen::Index>(s)) =
                        cplx(0.0, directions[s].dot(f.basis->cart[static_cast<std::size_t>(i)])) * f.coef(i, n);
            p.on.noalias() += cua.adjoint() * inv2.asDiagonal() * (cu.adjoint() * kgrad);
        }
        part[k] = std::move(p);
    });
    CMat csum = CMat::Zero(m, m);
    CMat on = CMat::Zero(m, static_cast<Eigen::Index>(nd));
    for (const auto& p : part) {
        csum += p.c;
        on += p.on;
    }
    const double w = bands.grid.weight;
    csum *= w / vol;
    on *= w / std::sqrt(vol);

    CMat full = g0h.asDiagonal() * csum * g0h.asDiagonal() * 2.0;
    out.c_matrix = full.bottomRightCorner(nz, nz);
    out.c_matrix.diagonal().array() += 1.0;
    out.c_matrix = 0.5 * (out.c_matrix + out.c_matrix.adjoint()).eval();

    // x_K(sigma) = conj(beta_K . sigma): orthonormal K-components of the limit column.
    const cplx pref(0.0, -2.0 * std::sqrt(4.0 * kPi) / std::sqrt(vol));
    CMat x = pref * (g0h.asDiagonal() * on);
    ResponseMatrixL L = response_matrix_L(bands, fermi);
    for (std::size_t s = 0; s < nd; ++s) {
        CVec b = x.col(static_cast<Eigen::Index>(s)) / std::sqrt(vol);
        b[0] = (1.0 + directions[s].dot(L.L * directions[s])) / std::sqrt(vol);
        out.b_sigma.push_back(std::move(b));
    }
    // beta_K from the overdetermined system directions * beta_K = conj(x_K).
    CMat rhs = x.bottomRows(nz).conjugate().transpose(); // nd x nz
    Eigen::MatrixXcd sol = svd.solve(rhs.real()).cast<cplx>() + cplx(0.0, 1.0) * svd.solve(rhs.imag()).cast<cplx>();
    out.beta = sol.transpose();
    return out;
}

std::vector<Vec3> default_directions()
{
    const double h = 1.0 / std::sqrt(2.0);
    return {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(h, h, 0),  Vec3(h, -h, 0),
            Vec3(h, 0, h), Vec3(h, 0, -h), Vec3(0, h, h), Vec3(0, h, -h)};
}

Mat3 fit_quadratic_form(const std::vector<Vec3>& directions, const std::vector<double>& values)
{
    if (directions.size() != values.size() || directions.size() < 6)
        throw ValidationError("fit_quadratic_form: needs at least 6 direction samples");
    Eigen::MatrixXd a(static_cast<Eigen::Index>(directions.size()), 6);
    Eigen::VectorXd y(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < directions.size(); ++i) {
        const Vec3 s = directions[i].normalized();
        const auto r = static_cast<Eigen::Index>(i);
        a.row(r) << s[0] * s[0], s[1] * s[1], s[2] * s[2], 2 * s[0] * s[1], 2 * s[0] * s[2], 2 * s[1] * s[2];
        y[r] = values[i];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!(svd.singularValues()[5] > 1e-8 * svd.singularValues()[0]))
        throw ValidationError("fit_quadratic_form: directions do not determine a symmetric tensor");
    Eigen::VectorXd c = svd.solve(y);
    Mat3 m;
    m << c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2];
    return m;
}

double richardson(const std::vector<double>& etas, const std::vector<double>& values)
{
    if (etas.size() != 3 || values.size() != 3) throw ValidationError("richardson: needs exactly three samples");
    const double r = etas[0] / etas[1];
    if (!(r > 1.0) || std::abs(etas[1] / etas[2] - r) > 1e-12 * r)
        throw ValidationError("richardson: eta sequence must be geometric and decreasing");
    const double r2 = r * r, r4 = r2 * r2;
    double a = (r2 * values[1] - values[0]) / (r2 - 1.0);
    double b = (r2 * values[2] - values[1]) / (r2 - 1.0);
    return (r4 * b - a) / (r4 - 1.0);
}

MacroscopicTensor epsilon_m_schur(const BlochBands& bands, const FermiData& fermi, const std::vector<double>& etas,
                                  const std::vector<Vec3>& directions)
{
    const double inscribed = bands.model.lattice.inscribed_radius();
    for (double e : etas)
        if (!(e > 0.0 && e < inscribed)) throw ValidationError("epsilon_m_schur: eta outside the Brillouin zone");
    std::vector<double> values;
    for (const Vec3& dir : directions) {
        const Vec3 s = dir.normalized();
        std::vector<double> f;
        for (double e : etas) {
            DielectricBlochMatrix et = epsilon_tilde(bands, fermi, e * s);
            Eigen::LLT<CMat> llt(et.matrix);
            if (llt.info() != Eigen::Success) throw NumericalError("epsilon_m_schur: dielectric matrix is singular");
            CVec e0 = CVec::Zero(et.matrix.rows());
            e0[0] = 1.0;
            f.push_back(1.0 / llt.solve(e0)[0].real());
        }
        values.push_back(richardson(etas, f));
    }
    return {fit_quadratic_form(directions, values), "schur"};
}

MacroscopicTensor epsilon_m_components(const HeadLimitData& head, const ResponseMatrixL& L)
{
    Eigen::LLT<CMat> llt(head.c_matrix);
    if (llt.info() != Eigen::Success) throw NumericalError("epsilon_m_components: C is not positive definite");
    CMat cb = llt.solve(head.beta.conjugate());
    Mat3 local = (head.beta.transpose() * cb).real();
    MacroscopicTensor out;
    out.eps = Mat3::Identity() + L.L - 0.5 * (local + local.transpose());
    out.route = "components";
    return out;
}

} // namespace rhf

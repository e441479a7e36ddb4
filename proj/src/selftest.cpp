#include "rhf/selftest.hpp"

#include "rhf/defect_scf.hpp"
#include "rhf/homogenization.hpp"
#include "rhf/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <random>

namespace rhf {

RunConfig cubic_preset()
{
    RunConfig cfg = parse_config_text("[crystal]\npreset = mathieu\namplitudes = 1 1 1\n");
    return cfg;
}

RunConfig aniso_preset()
{
    return parse_config_text("[crystal]\npreset = mathieu\namplitudes = 3 1 1\n");
}

std::string format_criterion(const CriterionResult& r)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.1f s)", r.seconds);
    return std::string(r.pass ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + ": " + r.detail + buf;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double min_eig(const Mat3& m)
{
    return Eigen::SelfAdjointEigenSolver<Mat3>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
}

struct Crystal {
    CrystalModel model;
    BlochBands bands;
    FermiData fermi;
    ResponseMatrixL L;
    std::optional<MacroscopicTensor> route_b;
};

class Context {
public:
    explicit Context(const RunConfig& cfg) : cfg_(cfg), rng_(static_cast<std::uint64_t>(cfg.numerics.seed)) {}

    const RunConfig& cfg() const { return cfg_; }
    std::mt19937_64& rng() { return rng_; }

    Crystal& cubic() { return crystal(cubic_, cubic_preset()); }
    Crystal& aniso() { return crystal(aniso_, aniso_preset()); }

    const MacroscopicTensor& route_b(Crystal& c)
    {
        if (!c.route_b) {
            std::vector<Vec3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
            c.route_b = epsilon_m_components(head_limit_data(c.bands, c.fermi, axes), c.L);
        }
        return *c.route_b;
    }

    const Supercell& supercell(bool aniso, int m)
    {
        auto& slot = cells_[{aniso, m}];
        if (!slot) {
            const CrystalModel& model = aniso ? this->aniso().model : cubic().model;
            slot = std::make_unique<Supercell>(build_supercell(model, m, cfg_.defect.g_max, cfg_.numerics.gap_tol));
        }
        return *slot;
    }

    DefectConfig defect() const
    {
        DefectConfig d;
        d.charge = 0.01;
        d.width = cfg_.defect.width;
        d.center = cfg_.defect.center;
        return d;
    }

    ScfOptions anderson() const
    {
        ScfOptions o;
        o.mixing = Mixing::Anderson;
        o.mix = 0.5;
        o.tol = cfg_.defect.tol;
        o.max_iter = cfg_.defect.max_iter;
        o.gap_tol = cfg_.numerics.gap_tol;
        return o;
    }

    CVec random_coeffs(Eigen::Index n)
    {
        std::normal_distribution<double> g;
        CVec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(g(rng_), g(rng_));
        return v / v.norm();
    }

    Vec3 random_q(const Lattice& lat)
    {
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (;;) {
            Vec3 q = lat.from_frac(Vec3(u(rng_), u(rng_), u(rng_)));
            if (q.norm() > 1e-3) return q;
        }
    }

    std::optional<ScfResult> cubic_scf; // m = 3

private:
    Crystal& crystal(std::unique_ptr<Crystal>& slot, const RunConfig& preset)
    {
        if (!slot) {
            slot = std::make_unique<Crystal>();
            RunConfig run = cfg_;
            run.crystal = preset.crystal;
            slot->model = build_model(run);
            const Lattice& lat = slot->model.lattice;
            slot->bands = solve_bands(slot->model, bz_grid(lat, cfg_.numerics.n_k),
                                      enumerate_basis(lat, cfg_.numerics.g_max), band_options(run));
            slot->fermi = fermi_level(slot->bands, cfg_.numerics.gap_tol);
            slot->L = response_matrix_L(slot->bands, slot->fermi);
        }
        return *slot;
    }

    RunConfig cfg_;
    std::mt19937_64 rng_;
    std::unique_ptr<Crystal> cubic_, aniso_;
    std::map<std::pair<bool, int>, std::unique_ptr<Supercell>> cells_;
};

using Check = CriterionResult (*)(Context&);

CriterionResult oracle_equivalence(Context& ctx)
{
    Crystal& c = ctx.cubic();
    const int n = ctx.cfg().numerics.n_k;
    Vec3 q = c.model.lattice.from_frac(Vec3(1.0 / n, 0.0, 0.0));
    PeriodicDensity v{q, ctx.random_coeffs(static_cast<Eigen::Index>(c.bands.density_basis.size()))};
    PeriodicDensity sos = apply_chi0(c.bands, c.fermi, v);
    PeriodicDensity con = q1v_density_contour(c.bands, c.fermi, v, make_contour(c.fermi, ctx.cfg().numerics.contour_nodes));
    double rel = (sos.coeff - con.coeff).norm() / sos.coeff.norm();
    return {1, "oracle equivalence", rel <= 1e-8, fmt("contour vs sum-over-states rel %.3e (tol 1e-8)", rel)};
}

CriterionResult neutrality(Context& ctx)
{
    Crystal& c = ctx.cubic();
    FiberCoupling coupling(c.bands, c.fermi, Vec3::Zero());
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        PeriodicDensity v{Vec3::Zero(), ctx.random_coeffs(static_cast<Eigen::Index>(c.bands.density_basis.size()))};
        worst = std::max(worst, std::abs(apply_chi0(c.bands, c.fermi, coupling, v).coeff[0]));
    }
    return {2, "linear-response neutrality", worst <= 1e-10,
            fmt("max |K=0 response| over 20 potentials %.3e (tol 1e-10)", worst)};
}

CriterionResult small_q(Context& ctx)
{
    Crystal& c = ctx.cubic();
    const double eta = 1e-2 * c.model.lattice.b.col(0).norm();
    std::vector<Vec3> dirs = default_directions();
    dirs.resize(6);
    double worst = 0.0;
    for (const Vec3& s : dirs) {
        double ratio = b_factor(c.bands, c.fermi, eta * s) / (eta * eta);
        double target = s.dot(c.L.L * s);
        worst = std::max(worst, std::abs(ratio / target - 1.0));
    }
    return {3, "small-q limit", worst <= 1e-3, fmt("max rel |B/eta^2 - s.L.s| over 6 directions %.3e (tol 1e-3)", worst)};
}

CriterionResult positivity(Context& ctx)
{
    bool ok = true;
    std::string detail;
    for (Crystal* c : {&ctx.cubic(), &ctx.aniso()}) {
        double lmin = min_eig(c->L.L);
        ok = ok && c->L.L0 > 1e-6 && lmin >= -1e-10;
        detail += fmt("%sL0 %.10f min eig %.3e", detail.empty() ? "" : "; ", c->L.L0, lmin);
    }
    return {4, "positivity", ok, detail};
}

CriterionResult dielectric_structure(Context& ctx)
{
    Crystal& c = ctx.cubic();
    double herm = 0.0, lowest = 1e300;
    for (int i = 0; i < 20; ++i) {
        DielectricBlochMatrix e = epsilon_tilde(c.bands, c.fermi, ctx.random_q(c.model.lattice));
        herm = std::max(herm, hermiticity_residual(e.matrix));
        CMat h = 0.5 * (e.matrix + e.matrix.adjoint());
        lowest = std::min(lowest, Eigen::SelfAdjointEigenSolver<CMat>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff());
    }
    return {5, "dielectric structure", herm <= 1e-10 && lowest >= 1.0 - 1e-8,
            fmt("hermiticity %.3e (tol 1e-10), min eigenvalue %.12f (>= 1 - 1e-8)", herm, lowest)};
}

CriterionResult two_routes(Context& ctx)
{
    bool ok = true;
    std::string detail;
    const double eta0 = ctx.cfg().numerics.eta0;
    for (int p = 0; p < 2; ++p) {
        Crystal& c = p == 0 ? ctx.cubic() : ctx.aniso();
        const Mat3& b = ctx.route_b(c).eps;
        Mat3 a = epsilon_m_schur(c.bands, c.fermi, {eta0, eta0 / 2, eta0 / 4}, default_directions()).eps;
        double agree = (a - b).norm() / b.norm();
        Mat3 one_plus_l = Mat3::Identity() + c.L.L;
        double lower = std::min(min_eig(a - Mat3::Identity()), min_eig(b - Mat3::Identity()));
        double upper = std::min(min_eig(one_plus_l - a), min_eig(one_plus_l - b));
        ok = ok && agree <= 1e-6 && lower >= -1e-8 && upper >= -1e-8;
        detail += fmt("%s%s eps_M diag %.10f %.10f %.10f, routes rel %.2e, bounds margins %.2e %.2e", p ? "; " : "",
                      p ? "aniso" : "cubic", b(0, 0), b(1, 1), b(2, 2), agree, lower, upper);
        if (p == 0) {
            double s = b.trace() / 3.0;
            double iso = (b - s * Mat3::Identity()).norm() / s;
            ok = ok && iso <= 1e-6;
            detail += fmt(", isotropy %.2e", iso);
        }
    }
    return {6, "two-route eps_M", ok, detail};
}

CriterionResult scf_neutrality(Context& ctx)
{
    const Supercell& cell = ctx.supercell(false, 3);
    ScfOptions o;
    o.mix = ctx.cfg().defect.mix;
    o.tol = 1e-8;
    o.max_iter = ctx.cfg().defect.max_iter;
    o.gap_tol = ctx.cfg().numerics.gap_tol;
    try {
        ctx.cubic_scf = scf_solve(cell, ctx.defect(), o);
    } catch (const NumericalError& e) {
        return {7, "SCF neutrality", false, e.what()};
    }
    const ScfResult& r = *ctx.cubic_scf;
    bool ok = std::abs(r.tr0) <= 1e-8 && r.iterations <= 50;
    return {7, "SCF neutrality", ok,
            fmt("m=3 Z=0.01: |Tr(gamma - gamma0)| %.3e (tol 1e-8), %d iterations (<= 50), residual %.2e", std::abs(r.tr0),
                r.iterations, r.residual_history.back())};
}

CriterionResult screening(Context& ctx)
{
    const ResponseMatrixL& L = ctx.cubic().L;
    const Supercell& c3 = ctx.supercell(false, 3);
    ScreeningReport lr = screening_diagnostic(linear_response_solve(c3, ctx.defect()), L);
    bool ok = lr.rel_deviation <= 0.02;
    std::string detail = fmt("1/(1+L0) %.8f; linear response m=3 ratio %.8f (dev %.2e, tol 2e-2); SCF", lr.predicted,
                             lr.ratio, lr.rel_deviation);
    double prev = 1e300;
    for (int m = 2; m <= 4; ++m) {
        ScfResult r = (m == 3 && ctx.cubic_scf) ? *ctx.cubic_scf : scf_solve(ctx.supercell(false, m), ctx.defect(), ctx.anderson());
        ScreeningReport s = screening_diagnostic(r, L);
        ok = ok && s.rel_deviation <= 0.10 && s.rel_deviation < prev;
        prev = s.rel_deviation;
        detail += fmt(" m=%d %.8f (dev %.2e)", m, s.ratio, s.rel_deviation);
    }
    return {8, "screening factor", ok, detail};
}

CriterionResult anisotropy(Context& ctx)
{
    if (!ctx.cubic_scf) {
        ScfOptions o = ctx.anderson();
        ctx.cubic_scf = scf_solve(ctx.supercell(false, 3), ctx.defect(), o);
    }
    AnisotropyReport iso = anisotropy_diagnostic(*ctx.cubic_scf, ctx.cubic().L);
    ScfResult r = scf_solve(ctx.supercell(true, 3), ctx.defect(), ctx.anderson());
    AnisotropyReport an = anisotropy_diagnostic(r, ctx.aniso().L);
    double dev = 0.0;
    for (int a = 0; a < 2; ++a)
        dev = std::max(dev, std::abs(an.ratios[static_cast<std::size_t>(a)] / an.predicted[static_cast<std::size_t>(a)] - 1.0));
    double spread = std::abs(an.ratios[0] - an.ratios[1]);
    double iso_spread = std::abs(iso.ratios[0] - iso.ratios[1]);
    bool ok = dev <= 0.10 && spread > 5.0 * iso_spread;
    return {9, "anisotropy witness", ok,
            fmt("aniso e1 %.8f (pred %.8f), e2 %.8f (pred %.8f), max dev %.2e (tol 0.1); spread %.3e vs isotropic %.3e",
                an.ratios[0], an.predicted[0], an.ratios[1], an.predicted[1], dev, spread, iso_spread)};
}

CriterionResult homogenization(Context& ctx)
{
    const auto& hs = ctx.cfg().homogenization;
    KGrid grid = homogenization_grid(hs.k_radius, hs.k_step);
    MomentumDensity nu = gaussian_density(1.0, 1.0);
    bool ok = true;
    std::string detail;
    for (int p = 0; p < 2; ++p) {
        Crystal& c = p == 0 ? ctx.cubic() : ctx.aniso();
        HomogenizedSolution hom = homogenized_solution(nu, ctx.route_b(c).eps, grid);
        double prev = 1e300, last = 0.0;
        detail += p ? "; aniso" : "cubic";
        for (double eta : hs.etas) {
            last = weak_convergence_metric(rescaled_potential(c.bands, c.fermi, nu, eta, grid), hom, default_test_weights());
            ok = ok && last < prev;
            prev = last;
            detail += fmt(" %.3e", last);
        }
        ok = ok && last <= 0.1;
    }
    Crystal& c = ctx.cubic();
    FermiData vac = vacuum_fermi(c.bands);
    std::vector<cplx> first;
    bool exact = true;
    for (double eta : hs.etas) {
        RescaledPotential w = rescaled_potential(c.bands, vac, nu, eta, grid);
        if (first.empty()) first = w.w_hat;
        else exact = exact && w.w_hat == first;
    }
    ok = ok && exact;
    detail += exact ? "; no-response W^eta identical across eta" : "; no-response W^eta varies with eta";
    return {10, "homogenization", ok, detail};
}

CriterionResult second_order(Context& ctx)
{
    Crystal& c = ctx.cubic();
    MomentumDensity rho = gaussian_density(1.0, 2.0);
    bool ok = true;
    double prev = 1e300;
    std::string detail = "|r2(eta e1)|";
    for (double eta : ctx.cfg().homogenization.etas) {
        double v = std::abs(r2_density(c.bands, c.fermi, rho, eta * Vec3::UnitX()).coeff[0]);
        ok = ok && v < prev;
        prev = v;
        detail += fmt(" %.4e", v);
    }
    return {11, "second order", ok, detail};
}

CriterionResult invariants(Context& ctx)
{
    Crystal& c = ctx.cubic();
    const RunConfig& cfg = ctx.cfg();
    double idem = 0.0, trace = 0.0;
    for (const Fiber& f : c.bands.fibers) {
        CMat p = spectral_projector(assemble_fiber(c.model, f.q, *f.basis), c.fermi.fermi);
        idem = std::max(idem, (p * p - p).norm());
        trace = std::max(trace, std::abs(p.trace().real() - c.fermi.n_occupied));
    }

    double tr = 0.0;
    for (int i = 0; i < 5; ++i) {
        Vec3 q = ctx.random_q(c.model.lattice);
        auto bp = std::make_shared<PlaneWaveBasis>(enumerate_basis_around(c.model.lattice, cfg.numerics.g_max, q));
        auto bm = std::make_shared<PlaneWaveBasis>(enumerate_basis_around(c.model.lattice, cfg.numerics.g_max, -q));
        RVec ep = diagonalize_fiber(c.model, q, bp).eps, em = diagonalize_fiber(c.model, -q, bm).eps;
        tr = std::max(tr, (ep - em).cwiseAbs().maxCoeff());
    }

    const int n = cfg.numerics.n_k;
    Vec3 q = c.model.lattice.from_frac(Vec3(1.0 / n, 1.0 / n, 0.0));
    PeriodicDensity v{q, ctx.random_coeffs(static_cast<Eigen::Index>(c.bands.density_basis.size()))};
    const CVec rho = periodic_density(c.bands, c.fermi);
    const CVec resp = apply_chi0(c.bands, c.fermi, v).coeff;

    BandOptions random_phase;
    random_phase.phase = PhaseConvention::SeededRandom;
    random_phase.seed = static_cast<unsigned long long>(cfg.numerics.seed) + 1;
    BlochBands gauged = solve_bands(c.model, c.bands.grid, enumerate_basis(c.model.lattice, cfg.numerics.g_max), random_phase);
    double gauge = std::max((periodic_density(gauged, c.fermi) - rho).norm() / rho.norm(),
                            (apply_chi0(gauged, c.fermi, v).coeff - resp).norm() / resp.norm());

    const double shift = 0.37;
    CrystalModel shifted = c.model;
    shifted.v_fourier[{0, 0, 0}] += shift;
    BlochBands sb = solve_bands(shifted, c.bands.grid, enumerate_basis(c.model.lattice, cfg.numerics.g_max));
    FermiData sf = fermi_level(sb, cfg.numerics.gap_tol);
    double eshift = std::abs(sf.fermi - c.fermi.fermi - shift);
    for (std::size_t i = 0; i < sb.fibers.size(); ++i)
        eshift = std::max(eshift, ((sb.fibers[i].eps - c.bands.fibers[i].eps).array() - shift).abs().maxCoeff());
    double cov = std::max((periodic_density(sb, sf) - rho).norm() / rho.norm(),
                          (apply_chi0(sb, sf, v).coeff - resp).norm() / resp.norm());

    bool ok = idem <= 1e-10 && trace <= 1e-10 && tr <= 1e-10 && gauge <= 1e-10 && eshift <= 1e-10 && cov <= 1e-10;
    return {12, "structural invariants", ok,
            fmt("idempotence %.2e, trace %.2e, time reversal %.2e, gauge %.2e, shift spectrum %.2e, shift response %.2e "
                "(all tol 1e-10)",
                idem, trace, tr, gauge, eshift, cov)};
}

} // namespace

std::vector<CriterionResult> run_acceptance(const SelftestOptions& options)
{
    static const Check checks[] = {oracle_equivalence, neutrality,      small_q,        positivity,
                                   dielectric_structure, two_routes,   scf_neutrality, screening,
                                   anisotropy,          homogenization, second_order,   invariants};
    // Runtime budgets in seconds; 0 means unbudgeted.
    static const double budget[] = {60, 0, 120, 0, 0, 300, 300, 0, 0, 300, 0, 0};
    static const char* names[] = {"oracle equivalence", "linear-response neutrality", "small-q limit", "positivity",
                                  "dielectric structure", "two-route eps_M", "SCF neutrality", "screening factor",
                                  "anisotropy witness", "homogenization", "second order", "structural invariants"};
    Context ctx(options.config);
    std::vector<CriterionResult> out;
    const auto t_start = Clock::now();
    for (int id = 1; id <= 12; ++id) {
        if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), id) == options.only.end())
            continue;
        auto t0 = Clock::now();
        CriterionResult r;
        try {
            r = checks[id - 1](ctx);
        } catch (const Error& e) {
            r = {id, "", false, std::string("error: ") + e.what()};
        }
        r.id = id;
        r.name = names[id - 1];
        r.seconds = since(t0);
        if (budget[id - 1] > 0.0) {
            r.pass = r.pass && r.seconds < budget[id - 1];
            r.detail += fmt("; runtime budget %.0f s", budget[id - 1]);
        }
        if (id == 12 && options.only.empty()) {
            double total = since(t_start);
            r.pass = r.pass && total < 900.0;
            r.detail += fmt("; full suite %.1f s (< 900)", total);
        }
        if (options.on_result) options.on_result(r);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace rhf

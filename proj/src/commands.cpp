#include "rhf/commands.hpp"

#include "rhf/defect_scf.hpp"
#include "rhf/homogenization.hpp"
#include "rhf/selftest.hpp"

#include <Eigen/Eigenvalues>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace rhf {

void Summary::set(const std::string& section, const std::string& key, const std::string& value)
{
    for (auto& [name, entries] : sections)
        if (name == section) {
            entries.emplace_back(key, value);
            return;
        }
    sections.push_back({section, {{key, value}}});
}

void Summary::set(const std::string& section, const std::string& key, double value)
{
    set(section, key, format_number(value));
}

std::string Summary::text() const
{
    std::ostringstream os;
    for (std::size_t s = 0; s < sections.size(); ++s) {
        if (s) os << "\n";
        os << "[" << sections[s].first << "]\n";
        for (const auto& [k, v] : sections[s].second) os << k << " = " << v << "\n";
    }
    return os.str();
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string num(double x) { return format_number(x); }
std::string num(int x) { return std::to_string(x); }

void add_fermi(Summary& s, const FermiData& f)
{
    s.set("fermi", "sigma_plus", f.sigma_plus);
    s.set("fermi", "sigma_minus_next", f.sigma_minus_next);
    s.set("fermi", "fermi", f.fermi);
    s.set("fermi", "gap", f.gap);
    s.set("fermi", "n_occupied", std::to_string(f.n_occupied));
    s.set("fermi", "min_spectrum", f.min_spectrum);
}

void add_matrix(Summary& s, const std::string& section, const std::string& key, const Mat3& m)
{
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s.set(section, key + "_" + std::to_string(i + 1) + std::to_string(j + 1), m(i, j));
}

Table matrix_table(const std::string& name, const std::vector<std::pair<std::string, Mat3>>& mats)
{
    Table t{name, {"quantity", "i", "j", "value"}, {}};
    for (const auto& [label, m] : mats)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t.add({label, num(i + 1), num(j + 1), num(m(i, j))});
    return t;
}

struct Host {
    CrystalModel model;
    BlochBands bands;
    FermiData fermi;
};

Host solve_host(const RunConfig& cfg, std::ostream& log)
{
    Host h;
    h.model = build_model(cfg);
    const Lattice& lat = h.model.lattice;
    PlaneWaveBasis basis = enumerate_basis(lat, cfg.numerics.g_max);
    h.bands = solve_bands(h.model, bz_grid(lat, cfg.numerics.n_k), basis, band_options(cfg));
    log << "[rhf] bands: " << h.bands.fibers.size() << " fibers, " << basis.size() << " plane waves at Gamma\n";
    h.fermi = fermi_level(h.bands, cfg.numerics.gap_tol);
    log << "[rhf] fermi level " << format_number(h.fermi.fermi) << ", gap " << format_number(h.fermi.gap) << "\n";
    return h;
}

void add_run(Summary& s, const std::string& command, const RunConfig& cfg)
{
    s.set("run", "command", command);
    s.set("run", "version", kVersion);
    s.set("run", "config_hash", config_hash(cfg));
}

} // namespace

std::string table_csv(const Table& table, const RunConfig& cfg, const std::string& command)
{
    std::ostringstream os;
    os << "# rhf " << kVersion << "\n";
    os << "# command " << command << "\n";
    os << "# config_hash " << config_hash(cfg) << "\n";
    for (std::size_t i = 0; i < table.header.size(); ++i) os << (i ? "," : "") << csv_field(table.header[i]);
    os << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(row[i]);
        os << "\n";
    }
    return os.str();
}

void write_bundle(const ResultBundle& bundle, const RunConfig& cfg, const std::string& directory)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw ValidationError("output.directory: cannot create '" + directory + "': " + ec.message());
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(fs::path(directory) / name, std::ios::binary);
        if (!out) throw ValidationError("output.directory: cannot write '" + name + "'");
        out << text;
    };
    for (const Table& t : bundle.tables) write(t.name + ".csv", table_csv(t, cfg, bundle.command));
    write("summary.txt", bundle.summary.text());
    write("config.txt", emit_config(cfg));
}

ResultBundle run_bands(const RunConfig& cfg, std::ostream& log)
{
    Host h = solve_host(cfg, log);
    const Lattice& lat = h.model.lattice;
    const int n_bands = h.model.n_electrons + 4;

    struct Corner {
        const char* label;
        Vec3 frac;
    };
    const std::vector<Corner> path = {{"G", Vec3(0, 0, 0)},
                                      {"X", Vec3(0.5, 0, 0)},
                                      {"M", Vec3(0.5, 0.5, 0)},
                                      {"G", Vec3(0, 0, 0)},
                                      {"R", Vec3(0.5, 0.5, 0.5)}};
    const int per_segment = 16;

    Table t{"bands", {"index", "path_length", "label", "qx", "qy", "qz"}, {}};
    for (int b = 1; b <= n_bands; ++b) t.header.push_back("band_" + std::to_string(b));

    // The path refines the grid, so a band touching between grid points shows up here.
    double top = h.fermi.sigma_plus, bottom = h.fermi.sigma_minus_next;
    double length = 0.0;
    Vec3 prev = lat.from_frac(path.front().frac);
    int index = 0;
    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
        const int last = s + 2 == path.size() ? per_segment : per_segment - 1;
        for (int i = 0; i <= last; ++i) {
            Vec3 f = path[s].frac + (path[s + 1].frac - path[s].frac) * (static_cast<double>(i) / per_segment);
            Vec3 q = lat.from_frac(f);
            length += (q - prev).norm();
            prev = q;
            auto basis = std::make_shared<PlaneWaveBasis>(enumerate_basis_around(lat, cfg.numerics.g_max, q));
            Fiber fib = diagonalize_fiber(h.model, q, basis, band_options(cfg));
            if (fib.eps.size() < n_bands) throw ValidationError("numerics.g_max: too few plane waves for the band table");
            top = std::max(top, fib.eps[h.model.n_electrons - 1]);
            bottom = std::min(bottom, fib.eps[h.model.n_electrons]);
            std::string label = i == 0 ? path[s].label : (i == per_segment ? path[s + 1].label : "");
            std::vector<std::string> row{num(index++), num(length), label, num(q[0]), num(q[1]), num(q[2])};
            for (int b = 0; b < n_bands; ++b) row.push_back(num(fib.eps[b]));
            t.add(std::move(row));
        }
    }
    if (!(bottom - top > cfg.numerics.gap_tol)) {
        std::ostringstream os;
        os << "not an insulator: bands " << h.model.n_electrons << " and " << h.model.n_electrons + 1
           << " come within " << (bottom - top) << " <= gap_tol along the q-path";
        throw NumericalError(os.str());
    }

    ResultBundle out{"bands", {}, {}, false};
    add_run(out.summary, "bands", cfg);
    add_fermi(out.summary, h.fermi);
    out.summary.set("path", "sigma_plus", top);
    out.summary.set("path", "sigma_minus_next", bottom);
    out.summary.set("path", "gap", bottom - top);
    out.summary.set("basis", "plane_waves_gamma", std::to_string(h.bands.fibers.front().dim()));
    out.summary.set("basis", "density_components", std::to_string(h.bands.density_basis.size()));
    out.summary.set("basis", "grid_points", std::to_string(h.bands.grid.size()));
    out.tables.push_back(std::move(t));
    return out;
}

ResultBundle run_respond(const RunConfig& cfg, std::ostream& log)
{
    Host h = solve_host(cfg, log);
    ResponseMatrixL L = response_matrix_L(h.bands, h.fermi);
    log << "[rhf] L0 = " << format_number(L.L0) << "\n";

    Table b{"b_factor", {"direction", "sx", "sy", "sz", "eta", "B", "B_over_eta2", "sLs"}, {}};
    const std::vector<Vec3> dirs = default_directions();
    const double eta0 = cfg.numerics.eta0;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        const Vec3& s = dirs[d];
        for (double eta : {eta0, eta0 / 2, eta0 / 4}) {
            double v = b_factor(h.bands, h.fermi, eta * s);
            b.add({num(static_cast<int>(d)), num(s[0]), num(s[1]), num(s[2]), num(eta), num(v), num(v / (eta * eta)),
                   num(s.dot(L.L * s))});
        }
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(L.L);

    ResultBundle out{"respond", {}, {}, false};
    add_run(out.summary, "respond", cfg);
    add_fermi(out.summary, h.fermi);
    out.summary.set("response", "L0", L.L0);
    add_matrix(out.summary, "response", "L", L.L);
    for (int i = 0; i < 3; ++i) out.summary.set("response", "eigenvalue_" + std::to_string(i + 1), es.eigenvalues()[i]);
    out.tables.push_back(matrix_table("response_matrix", {{"L", L.L}}));
    out.tables.push_back(std::move(b));
    return out;
}

ResultBundle run_epsm(const RunConfig& cfg, std::ostream& log)
{
    Host h = solve_host(cfg, log);
    ResponseMatrixL L = response_matrix_L(h.bands, h.fermi);
    const std::vector<Vec3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
    log << "[rhf] route B (local-field components)\n";
    MacroscopicTensor b = epsilon_m_components(head_limit_data(h.bands, h.fermi, axes), L);
    log << "[rhf] route A (inverse head, " << default_directions().size() << " directions x 3 eta)\n";
    const double eta0 = cfg.numerics.eta0;
    MacroscopicTensor a = epsilon_m_schur(h.bands, h.fermi, {eta0, eta0 / 2, eta0 / 4}, default_directions());

    auto min_eig = [](const Mat3& m) {
        return Eigen::SelfAdjointEigenSolver<Mat3>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
    };
    const Mat3 upper = Mat3::Identity() + L.L;
    const double agreement = (a.eps - b.eps).norm() / b.eps.norm();
    const double scalar = b.eps.trace() / 3.0;

    ResultBundle out{"epsm", {}, {}, false};
    add_run(out.summary, "epsm", cfg);
    add_fermi(out.summary, h.fermi);
    out.summary.set("response", "L0", L.L0);
    add_matrix(out.summary, "route_schur", "eps", a.eps);
    add_matrix(out.summary, "route_components", "eps", b.eps);
    out.summary.set("agreement", "relative_difference", agreement);
    out.summary.set("agreement", "lower_margin", std::min(min_eig(a.eps - Mat3::Identity()), min_eig(b.eps - Mat3::Identity())));
    out.summary.set("agreement", "upper_margin", std::min(min_eig(upper - a.eps), min_eig(upper - b.eps)));
    out.summary.set("agreement", "anisotropy", (b.eps - scalar * Mat3::Identity()).norm() / scalar);
    out.tables.push_back(matrix_table("epsilon_m", {{"route_schur", a.eps}, {"route_components", b.eps}, {"one_plus_L", upper}}));
    log << "[rhf] routes agree to " << format_number(agreement) << " relative\n";
    return out;
}

ResultBundle run_defect(const RunConfig& cfg, std::ostream& log)
{
    Host h = solve_host(cfg, log);
    ResponseMatrixL L = response_matrix_L(h.bands, h.fermi);
    const DefectSection& ds = cfg.defect;
    Supercell cell = build_supercell(h.model, ds.m, ds.g_max, cfg.numerics.gap_tol);
    log << "[rhf] supercell m=" << ds.m << ": " << cell.dim() << " plane waves, fermi "
        << format_number(cell.fermi.fermi) << "\n";
    DefectConfig defect{ds.charge, ds.width, ds.center};

    ScfOptions opt;
    opt.mix = ds.mix;
    opt.tol = ds.tol;
    opt.max_iter = ds.max_iter;
    opt.mixing = ds.anderson ? Mixing::Anderson : Mixing::Linear;
    opt.gap_tol = cfg.numerics.gap_tol;
    opt.on_iteration = [&log](int it, double r) {
        log << "[rhf] scf iteration " << it << " residual " << format_number(r) << "\n";
    };
    ScfResult scf = scf_solve(cell, defect, opt);
    ScfResult lr = linear_response_solve(cell, defect);
    ScreeningReport screen = screening_diagnostic(scf, L);
    ScreeningReport screen_lr = screening_diagnostic(lr, L);
    AnisotropyReport aniso = anisotropy_diagnostic(scf, L);

    Table hist{"scf_history", {"iteration", "residual"}, {}};
    for (std::size_t i = 0; i < scf.residual_history.size(); ++i)
        hist.add({num(static_cast<int>(i + 1)), num(scf.residual_history[i])});
    Table samples{"rho_samples",
                  {"kx", "ky", "kz", "nu_re", "nu_im", "rho_scf_re", "rho_scf_im", "rho_lr_re", "rho_lr_im",
                   "screened_scf", "screened_lr"},
                  {}};
    for (std::size_t i = 0; i < scf.samples.size(); ++i) {
        const RhoSample& s = scf.samples[i];
        const RhoSample& l = lr.samples[i];
        samples.add({num(s.k[0]), num(s.k[1]), num(s.k[2]), num(s.nu_hat.real()), num(s.nu_hat.imag()),
                     num(s.rho_hat.real()), num(s.rho_hat.imag()), num(l.rho_hat.real()), num(l.rho_hat.imag()),
                     num(s.screened_fraction()), num(l.screened_fraction())});
    }

    ResultBundle out{"defect", {}, {}, false};
    Summary& sm = out.summary;
    add_run(sm, "defect", cfg);
    add_fermi(sm, h.fermi);
    sm.set("supercell", "m", std::to_string(ds.m));
    sm.set("supercell", "plane_waves", std::to_string(cell.dim()));
    sm.set("supercell", "fermi", cell.fermi.fermi);
    sm.set("supercell", "gap", cell.fermi.gap);
    sm.set("scf", "iterations", std::to_string(scf.iterations));
    sm.set("scf", "converged", scf.converged ? "true" : "false");
    sm.set("scf", "final_residual", scf.residual_history.back());
    sm.set("scf", "tr0", scf.tr0);
    sm.set("scf", "idempotence", scf.idempotence);
    sm.set("screening", "L0", L.L0);
    sm.set("screening", "predicted", screen.predicted);
    sm.set("screening", "ratio_scf", screen.ratio);
    sm.set("screening", "rel_deviation_scf", screen.rel_deviation);
    sm.set("screening", "ratio_linear_response", screen_lr.ratio);
    sm.set("screening", "rel_deviation_linear_response", screen_lr.rel_deviation);
    for (int a = 0; a < 3; ++a) {
        sm.set("anisotropy", "ratio_e" + std::to_string(a + 1), aniso.ratios[static_cast<std::size_t>(a)]);
        sm.set("anisotropy", "predicted_e" + std::to_string(a + 1), aniso.predicted[static_cast<std::size_t>(a)]);
    }
    sm.set("anisotropy", "spread", aniso.spread);
    sm.set("anisotropy", "predicted_spread", aniso.predicted_spread);
    sm.set("anisotropy", "max_rel_deviation", aniso.max_rel_deviation);
    out.tables.push_back(std::move(hist));
    out.tables.push_back(std::move(samples));
    return out;
}

ResultBundle run_homogenize(const RunConfig& cfg, std::ostream& log)
{
    Host h = solve_host(cfg, log);
    ResponseMatrixL L = response_matrix_L(h.bands, h.fermi);
    const std::vector<Vec3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
    MacroscopicTensor em = epsilon_m_components(head_limit_data(h.bands, h.fermi, axes), L);
    const HomogenizationSection& hs = cfg.homogenization;
    KGrid grid = homogenization_grid(hs.k_radius, hs.k_step);
    MomentumDensity nu = gaussian_density(cfg.defect.charge, cfg.defect.width);
    HomogenizedSolution hom = homogenized_solution(nu, em.eps, grid);

    Table metric{"homogenization", {"eta", "metric"}, {}};
    Table curves{"homogenization_curves", {"eta", "kx", "ky", "kz", "w_eta_re", "w_eta_im", "w_hom_re", "w_hom_im"}, {}};
    ResultBundle out{"homogenize", {}, {}, false};
    add_run(out.summary, "homogenize", cfg);
    add_fermi(out.summary, h.fermi);
    add_matrix(out.summary, "homogenization", "eps", em.eps);
    out.summary.set("homogenization", "grid_points", std::to_string(grid.points.size()));
    for (std::size_t e = 0; e < hs.etas.size(); ++e) {
        const double eta = hs.etas[e];
        RescaledPotential w = rescaled_potential(h.bands, h.fermi, nu, eta, grid);
        double m = weak_convergence_metric(w, hom, default_test_weights());
        log << "[rhf] eta " << format_number(eta) << " metric " << format_number(m) << "\n";
        metric.add({num(eta), num(m)});
        out.summary.set("homogenization", "metric_" + std::to_string(e + 1), m);
        for (std::size_t i = 0; i < grid.points.size(); ++i) {
            const Vec3& k = grid.points[i];
            curves.add({num(eta), num(k[0]), num(k[1]), num(k[2]), num(w.w_hat[i].real()), num(w.w_hat[i].imag()),
                        num(hom.w_hat[i].real()), num(hom.w_hat[i].imag())});
        }
    }
    out.tables.push_back(std::move(metric));
    out.tables.push_back(std::move(curves));
    return out;
}

ResultBundle run_selftest(const RunConfig& cfg, std::ostream& log)
{
    SelftestOptions opt;
    opt.config = cfg;
    opt.on_result = [&log](const CriterionResult& r) { log << format_criterion(r) << "\n"; };
    std::vector<CriterionResult> results = run_acceptance(opt);

    Table t{"selftest", {"id", "name", "pass", "seconds", "detail"}, {}};
    int passed = 0;
    for (const auto& r : results) {
        t.add({num(r.id), r.name, r.pass ? "true" : "false", num(r.seconds), r.detail});
        passed += r.pass;
    }
    ResultBundle out{"selftest", {}, {}, false};
    add_run(out.summary, "selftest", cfg);
    out.summary.set("selftest", "passed", std::to_string(passed));
    out.summary.set("selftest", "total", std::to_string(results.size()));
    out.tables.push_back(std::move(t));
    out.failed = passed != static_cast<int>(results.size());
    out.summary.set("selftest", "status", out.failed ? "fail" : "pass");
    return out;
}

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"bands", "respond", "epsm", "defect", "homogenize", "selftest"};
    return names;
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log)
{
    using Runner = ResultBundle (*)(const RunConfig&, std::ostream&);
    static const std::vector<std::pair<std::string, Runner>> table = {
        {"bands", run_bands},   {"respond", run_respond},       {"epsm", run_epsm},
        {"defect", run_defect}, {"homogenize", run_homogenize}, {"selftest", run_selftest}};
    try {
        for (const auto& [name, runner] : table) {
            if (name != command) continue;
            ResultBundle bundle = runner(cfg, log);
            write_bundle(bundle, cfg, cfg.output.directory);
            log << "[rhf] wrote " << cfg.output.directory << "\n";
            if (bundle.failed) log << "error: " << command << " reported failures\n";
            return bundle.failed ? 3 : 0;
        }
        log << "error: unknown command '" << command << "'\n";
        return 2;
    } catch (const ValidationError& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        log << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace rhf

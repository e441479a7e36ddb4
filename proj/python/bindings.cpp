#include "rhf/commands.hpp"
#include "rhf/dielectric.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;

namespace {

struct Crystal {
    rhf::CrystalModel model;
    rhf::BlochBands bands;
    rhf::FermiData fermi;
    rhf::ResponseMatrixL L;
};

Crystal solve(const rhf::RunConfig& cfg)
{
    Crystal c;
    c.model = rhf::build_model(cfg);
    c.bands = rhf::solve_bands(c.model, rhf::bz_grid(c.model.lattice, cfg.numerics.n_k),
                               rhf::enumerate_basis(c.model.lattice, cfg.numerics.g_max), rhf::band_options(cfg));
    c.fermi = rhf::fermi_level(c.bands, cfg.numerics.gap_tol);
    c.L = rhf::response_matrix_L(c.bands, c.fermi);
    return c;
}

} // namespace

PYBIND11_MODULE(_rhf, m)
{
    m.doc() = "Reduced Hartree-Fock dielectric response";
    m.attr("__version__") = rhf::kVersion;

    py::register_exception<rhf::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<rhf::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<rhf::RunConfig>(m, "RunConfig")
        .def("text", &rhf::emit_config)
        .def("hash", &rhf::config_hash)
        .def_property_readonly("g_max", [](const rhf::RunConfig& c) { return c.numerics.g_max; })
        .def_property_readonly("n_k", [](const rhf::RunConfig& c) { return c.numerics.n_k; })
        .def("__eq__", [](const rhf::RunConfig& a, const rhf::RunConfig& b) { return a == b; });

    m.def("parse_config_text", &rhf::parse_config_text, py::arg("text"), py::arg("overrides") = std::vector<std::string>{});
    m.def("parse_config", &rhf::parse_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "run_command",
        [](const std::string& command, const rhf::RunConfig& cfg) {
            std::ostringstream log;
            int code;
            {
                py::gil_scoped_release release;
                code = rhf::run_command(command, cfg, log);
            }
            return py::make_tuple(code, log.str());
        },
        py::arg("command"), py::arg("config"), "Runs a CLI command; returns (exit_code, log).");

    py::class_<Crystal>(m, "Crystal")
        .def(py::init([](const rhf::RunConfig& cfg) {
                 py::gil_scoped_release release;
                 return solve(cfg);
             }),
             py::arg("config"))
        .def_property_readonly("fermi", [](const Crystal& c) { return c.fermi.fermi; })
        .def_property_readonly("gap", [](const Crystal& c) { return c.fermi.gap; })
        .def_property_readonly("n_occupied", [](const Crystal& c) { return c.fermi.n_occupied; })
        .def_property_readonly("L", [](const Crystal& c) { return rhf::Mat3(c.L.L); })
        .def("band_energies", [](const Crystal& c, std::size_t fiber) {
            if (fiber >= c.bands.fibers.size()) throw py::index_error("fiber index out of range");
            return Eigen::VectorXd(c.bands.fibers[fiber].eps);
        })
        .def("b_factor", [](const Crystal& c, const rhf::Vec3& q) { return rhf::b_factor(c.bands, c.fermi, q); })
        .def("inverse_head", [](const Crystal& c, const rhf::Vec3& q) { return rhf::inverse_head(c.bands, c.fermi, q); })
        .def("epsilon_m", [](const Crystal& c) {
            std::vector<rhf::Vec3> axes{rhf::Vec3::UnitX(), rhf::Vec3::UnitY(), rhf::Vec3::UnitZ()};
            return rhf::Mat3(rhf::epsilon_m_components(rhf::head_limit_data(c.bands, c.fermi, axes), c.L).eps);
        })
        .def("epsilon_m_schur", [](const Crystal& c, const std::vector<double>& etas) {
            return rhf::Mat3(rhf::epsilon_m_schur(c.bands, c.fermi, etas, rhf::default_directions()).eps);
        });
}

#include "rhf/config.hpp"

#include <doctest.h>

#include <string>

using namespace rhf;

namespace {

std::string error_of(const std::string& text, const std::vector<std::string>& overrides = {})
{
    try {
        parse_config_text(text, overrides);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

} // namespace

TEST_SUITE("config")
{
    TEST_CASE("minimal file picks up the documented defaults")
    {
        RunConfig cfg = parse_config_text("[crystal]\npreset = mathieu\n");
        CHECK(cfg.numerics.g_max == doctest::Approx(3.0));
        CHECK(cfg.numerics.eta0 == doctest::Approx(0.05));
        CHECK(cfg.numerics.n_k == 4);
        CHECK(cfg.defect.g_max == doctest::Approx(2.0));
        CHECK(cfg.defect.mix == 0.2);
        CHECK(cfg.defect.m == 3);
        CHECK(cfg.homogenization.etas == std::vector<double>{0.2, 0.1, 0.05});
        CHECK(cfg.output.formats == "csv");
        CHECK(parse_config_text("") == cfg);
    }

    TEST_CASE("cutoff defaults follow the lattice constant")
    {
        RunConfig cfg = parse_config_text("[crystal]\nlattice_constant = 3.14159265358979312\n");
        CHECK(cfg.numerics.g_max == doctest::Approx(6.0));
        CHECK(cfg.defect.g_max == doctest::Approx(4.0));
    }

    TEST_CASE("invalid values name the offending key")
    {
        CHECK(contains(error_of("[numerics]\ng_max = -1\n"), "numerics.g_max"));
        CHECK(contains(error_of("[numerics]\nn_k = 0\n"), "numerics.n_k"));
        CHECK(contains(error_of("[numerics]\nn_k = 2.5\n"), "numerics.n_k"));
        CHECK(contains(error_of("[defect]\nmix = 1.5\n"), "defect.mix"));
        CHECK(contains(error_of("[defect]\nanderson = maybe\n"), "defect.anderson"));
        CHECK(contains(error_of("[homogenization]\netas = 0.1 0.2\n"), "homogenization.etas"));
        CHECK(contains(error_of("[crystal]\namplitudes = 1 2\n"), "crystal.amplitudes"));
        CHECK(contains(error_of("[crystal]\npreset = graphite\n"), "crystal.preset"));
        CHECK(contains(error_of("[output]\nformats = hdf5\n"), "output.formats"));
        CHECK(contains(error_of("[numerics]\ngap_tol = abc\n"), "expected a number"));
        CHECK(contains(error_of("[numerics]\ngap_tol = nan\n"), "expected a number"));
    }

    TEST_CASE("syntax errors carry line and column")
    {
        try {
            parse_config_text("[crystal]\n\n   amplitudes 1 1 1\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
            CHECK(e.column() == 4);
            CHECK(contains(e.what(), "config:3:4"));
        }
        CHECK_THROWS_AS(parse_config_text("[crystal\n"), ParseError);
        CHECK_THROWS_AS(parse_config_text("n_k = 3\n"), ParseError);
        CHECK_THROWS_AS(parse_config_text("[numerics]\nn_k = 3\nn_k = 4\n"), ParseError);
        CHECK_THROWS_AS(parse_config_text("[numerics]\nbad key = 3\n"), ParseError);
    }

    TEST_CASE("unknown sections and keys are rejected")
    {
        CHECK_THROWS_AS(parse_config_text("[solver]\n"), ParseError);
        std::string e = error_of("[numerics]\n\nnk = 3\n");
        CHECK(contains(e, "numerics.nk"));
        CHECK(contains(e, "line 3"));
        CHECK(contains(error_of("", {"numerics.nk=3"}), "override"));
    }

    TEST_CASE("overrides take precedence and malformed ones are rejected")
    {
        RunConfig cfg = parse_config_text("[numerics]\nn_k = 3\n", {"numerics.n_k=5", "defect.anderson = true"});
        CHECK(cfg.numerics.n_k == 5);
        CHECK(cfg.defect.anderson);
        CHECK_THROWS_AS(parse_config_text("", {"n_k=5"}), ValidationError);
        CHECK_THROWS_AS(parse_config_text("", {"numerics.n_k"}), ValidationError);
        CHECK_THROWS_AS(parse_config_text("", {"solver.n_k=5"}), ValidationError);
    }

    TEST_CASE("comments, blank lines and CRLF are accepted")
    {
        RunConfig cfg = parse_config_text("# header\r\n[numerics]   # numerics\r\nn_k = 2 # coarse\r\n\r\n");
        CHECK(cfg.numerics.n_k == 2);
    }

    TEST_CASE("emit then parse is the identity")
    {
        RunConfig cfg = parse_config_text(R"(
[crystal]
preset = custom
a1 = 6.283185307179586 0 0
a2 = 3.14159 6.283185307179586 0
a3 = 0 0 5.5
potential = 1 0 0 0.5 0.25; -1 0 0 0.5 -0.25; 0 1 1 -0.3 0; 0 -1 -1 -0.3 0
v0 = 0.1
[numerics]
g_max = 2.75
phase = seeded_random
seed = 123456789012
eta0 = 0.0123456789012345678
[defect]
center = 0.1 -0.2 0.3
anderson = true
[homogenization]
etas = 0.3 0.15 0.075 0.0375
[output]
directory = some/where
)");
        CHECK(cfg.crystal.potential.size() == 4);
        CHECK(cfg.numerics.seed == 123456789012LL);
        RunConfig back = parse_config_text(emit_config(cfg));
        CHECK(back == cfg);
        CHECK(emit_config(back) == emit_config(cfg));
        CHECK(config_hash(back) == config_hash(cfg));
        CHECK(config_hash(cfg).size() == 16);
        RunConfig other = cfg;
        other.numerics.eta0 = std::nextafter(cfg.numerics.eta0, 1.0);
        CHECK(config_hash(other) != config_hash(cfg));
    }

    TEST_CASE("numbers survive the text form bit for bit")
    {
        for (double x : {0.1, 1.0 / 3.0, 2.0 * kPi, 1e-300, 123456.78901234567}) {
            std::string s = format_number(x);
            CHECK(std::strtod(s.c_str(), nullptr) == x);
        }
    }

    TEST_CASE("custom crystal builds the listed potential")
    {
        RunConfig cfg = parse_config_text(
            "[crystal]\npreset = custom\na1 = 1 0 0\na2 = 0 1 0\na3 = 0 0 1\npotential = 1 0 0 0.5 0; -1 0 0 0.5 0\nv0 = 0.2\n");
        CrystalModel m = build_model(cfg);
        CHECK(m.v_fourier.at({1, 0, 0}) == cplx(0.5));
        CHECK(m.v_fourier.at({0, 0, 0}) == cplx(0.2));
        CHECK(m.lattice.volume == doctest::Approx(1.0));

        RunConfig bad = parse_config_text("[crystal]\npreset = custom\npotential = 1 0 0 0.5 0.1\n");
        CHECK_THROWS_AS(build_model(bad), ValidationError);
        CHECK_THROWS_AS(parse_config_text("[crystal]\npotential = 1.5 0 0 0.5 0\n"), ValidationError);
        CHECK_THROWS_AS(parse_config_text("[crystal]\npotential = 1 0 0 0.5\n"), ValidationError);
    }

    TEST_CASE("missing file is a validation error")
    {
        CHECK_THROWS_AS(parse_config("/nonexistent/rhf.conf"), ValidationError);
        RunConfig shipped = parse_config(std::string(RHF_SOURCE_DIR) + "/configs/cubic.conf");
        CHECK(shipped.crystal.amplitudes == Vec3(1, 1, 1));
        RunConfig aniso = parse_config(std::string(RHF_SOURCE_DIR) + "/configs/aniso.conf");
        CHECK(aniso.crystal.amplitudes == Vec3(3, 1, 1));
    }
}

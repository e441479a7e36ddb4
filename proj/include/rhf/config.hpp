#pragma once

#include "rhf/bloch_solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rhf {

// Malformed config text; carries the 1-based line and column.
class ParseError : public ValidationError {
public:
    ParseError(int line, int column, const std::string& what);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

struct CrystalSection {
    std::string preset = "mathieu"; // mathieu | custom
    Vec3 amplitudes{1.0, 1.0, 1.0};
    double lattice_constant = 2.0 * kPi;
    Vec3 a1{2.0 * kPi, 0.0, 0.0};
    Vec3 a2{0.0, 2.0 * kPi, 0.0};
    Vec3 a3{0.0, 0.0, 2.0 * kPi};
    // custom potential: (K, V^_K) pairs; the conjugate partners must be listed too
    std::vector<std::pair<IVec3, cplx>> potential;
    double v0 = 0.0;
    int n_electrons = 1;

    bool operator==(const CrystalSection&) const = default;
};

struct NumericsSection {
    double g_max = 0.0; // Bohr^-1; default 3 |b1|
    int n_k = 4;
    double gap_tol = 1e-8;
    int contour_nodes = 64;
    double eta0 = 0.0; // default 0.05 |b1|
    std::string phase = "largest_real"; // largest_real | seeded_random
    long long seed = 7;

    bool operator==(const NumericsSection&) const = default;
};

struct DefectSection {
    double charge = 0.01;
    double width = 2.0;
    Vec3 center{0.0, 0.0, 0.0};
    int m = 3;
    double g_max = 0.0; // Bohr^-1; default 2 |b1|
    double mix = 0.2;
    double tol = 1e-8;
    int max_iter = 100;
    bool anderson = false;

    bool operator==(const DefectSection&) const = default;
};

struct HomogenizationSection {
    std::vector<double> etas{0.2, 0.1, 0.05};
    double k_radius = 2.0;
    double k_step = 2.0 / 3.0;

    bool operator==(const HomogenizationSection&) const = default;
};

struct OutputSection {
    std::string directory = "rhf_out";
    std::string formats = "csv";

    bool operator==(const OutputSection&) const = default;
};

struct RunConfig {
    CrystalSection crystal;
    NumericsSection numerics;
    DefectSection defect;
    HomogenizationSection homogenization;
    OutputSection output;

    bool operator==(const RunConfig&) const = default;
};

// Grammar documented in docs/config_grammar.md. Overrides are "section.key=value"
// and take precedence over the text. Unknown keys are rejected.
RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Canonical text form: every key, 17 significant digits, parseable by parse_config_text.
std::string emit_config(const RunConfig& cfg);

// FNV-1a 64-bit hash of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

CrystalModel build_model(const RunConfig& cfg);
BandOptions band_options(const RunConfig& cfg);

// "%.17g"
std::string format_number(double x);

} // namespace rhf

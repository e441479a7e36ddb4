#include "rhf/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rhf {

ParseError::ParseError(int line, int column, const std::string& what)
    : ValidationError("config:" + std::to_string(line) + ":" + std::to_string(column) + ": " + what), line_(line),
      column_(column)
{
}

std::string format_number(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

const std::map<std::string, std::set<std::string>>& schema()
{
    static const std::map<std::string, std::set<std::string>> s = {
        {"crystal", {"preset", "amplitudes", "lattice_constant", "a1", "a2", "a3", "potential", "v0", "n_electrons"}},
        {"numerics", {"g_max", "n_k", "gap_tol", "contour_nodes", "eta0", "phase", "seed"}},
        {"defect", {"charge", "width", "center", "m", "g_max", "mix", "tol", "max_iter", "anderson"}},
        {"homogenization", {"etas", "k_radius", "k_step"}},
        {"output", {"directory", "formats"}},
    };
    return s;
}

std::string trim(const std::string& s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_name(const std::string& s)
{
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

struct Entry {
    std::string value;
    int line = 0; // 0 for command-line overrides
};

using Entries = std::map<std::string, Entry>; // "section.key" -> value

Entries read_entries(const std::string& text)
{
    Entries out;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string line = raw.substr(0, raw.find('#'));
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const int col = static_cast<int>(first) + 1;
        std::string body = trim(line);
        if (body.front() == '[') {
            if (body.back() != ']') throw ParseError(lineno, col, "unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            if (!schema().count(section)) throw ParseError(lineno, col + 1, "unknown section '" + section + "'");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, col, "expected 'key = value'");
        if (section.empty()) throw ParseError(lineno, col, "key outside of any section");
        std::string key = trim(line.substr(0, eq));
        if (!valid_name(key)) throw ParseError(lineno, col, "invalid key name '" + key + "'");
        std::string full = section + "." + key;
        if (out.count(full)) throw ParseError(lineno, col, "duplicate key '" + full + "'");
        out[full] = {trim(line.substr(eq + 1)), lineno};
    }
    return out;
}

class Reader {
public:
    explicit Reader(Entries entries) : entries_(std::move(entries)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    const std::string* raw(const std::string& key)
    {
        auto it = entries_.find(key);
        if (it == entries_.end()) return nullptr;
        used_.insert(key);
        return &it->second.value;
    }

    void number(const std::string& key, double& out)
    {
        if (const std::string* v = raw(key)) out = to_double(key, *v);
    }

    void integer(const std::string& key, int& out)
    {
        long long v = out;
        integer64(key, v);
        out = static_cast<int>(v);
    }

    void integer64(const std::string& key, long long& out)
    {
        if (const std::string* v = raw(key)) {
            char* end = nullptr;
            errno = 0;
            long long x = std::strtoll(v->c_str(), &end, 10);
            if (v->empty() || *end != '\0' || errno != 0) fail(key, "expected an integer, got '" + *v + "'");
            out = x;
        }
    }

    void text(const std::string& key, std::string& out)
    {
        if (const std::string* v = raw(key)) out = *v;
    }

    void boolean(const std::string& key, bool& out)
    {
        if (const std::string* v = raw(key)) {
            if (*v == "true" || *v == "1" || *v == "yes") out = true;
            else if (*v == "false" || *v == "0" || *v == "no") out = false;
            else fail(key, "expected true or false, got '" + *v + "'");
        }
    }

    void vec3(const std::string& key, Vec3& out)
    {
        if (const std::string* v = raw(key)) {
            std::vector<double> xs = list(key, *v);
            if (xs.size() != 3) fail(key, "expected three numbers");
            out = Vec3(xs[0], xs[1], xs[2]);
        }
    }

    void numbers(const std::string& key, std::vector<double>& out)
    {
        if (const std::string* v = raw(key)) out = list(key, *v);
    }

    void potential(const std::string& key, std::vector<std::pair<IVec3, cplx>>& out)
    {
        const std::string* v = raw(key);
        if (!v) return;
        out.clear();
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ';')) {
            item = trim(item);
            if (item.empty()) continue;
            std::vector<double> xs = list(key, item);
            if (xs.size() != 5) fail(key, "each term needs 'i j k re im'");
            IVec3 k;
            for (int d = 0; d < 3; ++d) {
                if (xs[static_cast<std::size_t>(d)] != std::round(xs[static_cast<std::size_t>(d)]))
                    fail(key, "reciprocal-lattice indices must be integers");
                k[static_cast<std::size_t>(d)] = static_cast<int>(xs[static_cast<std::size_t>(d)]);
            }
            out.emplace_back(k, cplx(xs[3], xs[4]));
        }
    }

    void reject_unused() const
    {
        for (const auto& [key, entry] : entries_)
            if (!used_.count(key)) {
                std::string where = entry.line > 0 ? " (line " + std::to_string(entry.line) + ")" : " (override)";
                throw ValidationError("unknown key \"" + key + "\"" + where);
            }
    }

    [[noreturn]] static void fail(const std::string& key, const std::string& what)
    {
        throw ValidationError("\"" + key + "\": " + what);
    }

private:
    static double to_double(const std::string& key, const std::string& v)
    {
        char* end = nullptr;
        double x = std::strtod(v.c_str(), &end);
        if (v.empty() || *end != '\0' || !std::isfinite(x)) fail(key, "expected a number, got '" + v + "'");
        return x;
    }

    static std::vector<double> list(const std::string& key, const std::string& v)
    {
        std::istringstream in(v);
        std::vector<double> out;
        std::string tok;
        while (in >> tok) out.push_back(to_double(key, tok));
        return out;
    }

    Entries entries_;
    std::set<std::string> used_;
};

void require(bool ok, const std::string& key, const std::string& what)
{
    if (!ok) Reader::fail(key, what);
}

double reciprocal_unit(const CrystalSection& c)
{
    if (c.preset == "mathieu") return 2.0 * kPi / c.lattice_constant;
    return build_lattice(c.a1, c.a2, c.a3).b.col(0).norm();
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides)
{
    Entries entries = read_entries(text);
    for (const std::string& ov : overrides) {
        std::size_t eq = ov.find('=');
        std::size_t dot = ov.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ValidationError("malformed override '" + ov + "' (expected section.key=value)");
        std::string section = trim(ov.substr(0, dot));
        std::string key = trim(ov.substr(dot + 1, eq - dot - 1));
        if (!schema().count(section)) throw ValidationError("override names unknown section '" + section + "'");
        entries[section + "." + key] = {trim(ov.substr(eq + 1)), 0};
    }

    Reader r(std::move(entries));
    RunConfig cfg;
    CrystalSection& c = cfg.crystal;
    r.text("crystal.preset", c.preset);
    r.vec3("crystal.amplitudes", c.amplitudes);
    r.number("crystal.lattice_constant", c.lattice_constant);
    r.vec3("crystal.a1", c.a1);
    r.vec3("crystal.a2", c.a2);
    r.vec3("crystal.a3", c.a3);
    r.potential("crystal.potential", c.potential);
    r.number("crystal.v0", c.v0);
    r.integer("crystal.n_electrons", c.n_electrons);
    require(c.preset == "mathieu" || c.preset == "custom", "crystal.preset", "must be 'mathieu' or 'custom'");
    require(c.lattice_constant > 0.0, "crystal.lattice_constant", "must be positive");
    require(c.n_electrons >= 1, "crystal.n_electrons", "must be >= 1");
    const double unit = reciprocal_unit(c);

    NumericsSection& n = cfg.numerics;
    const bool has_g = r.has("numerics.g_max"), has_eta0 = r.has("numerics.eta0");
    r.number("numerics.g_max", n.g_max);
    r.integer("numerics.n_k", n.n_k);
    r.number("numerics.gap_tol", n.gap_tol);
    r.integer("numerics.contour_nodes", n.contour_nodes);
    r.number("numerics.eta0", n.eta0);
    r.text("numerics.phase", n.phase);
    r.integer64("numerics.seed", n.seed);
    if (!has_g) n.g_max = 3.0 * unit;
    if (!has_eta0) n.eta0 = 0.05 * unit;
    require(n.g_max > 0.0, "numerics.g_max", "must be positive");
    require(n.n_k >= 1, "numerics.n_k", "must be >= 1");
    require(n.gap_tol > 0.0, "numerics.gap_tol", "must be positive");
    require(n.contour_nodes >= 4, "numerics.contour_nodes", "must be >= 4");
    require(n.eta0 > 0.0, "numerics.eta0", "must be positive");
    require(n.phase == "largest_real" || n.phase == "seeded_random", "numerics.phase",
            "must be 'largest_real' or 'seeded_random'");

    DefectSection& d = cfg.defect;
    const bool has_dg = r.has("defect.g_max");
    r.number("defect.charge", d.charge);
    r.number("defect.width", d.width);
    r.vec3("defect.center", d.center);
    r.integer("defect.m", d.m);
    r.number("defect.g_max", d.g_max);
    r.number("defect.mix", d.mix);
    r.number("defect.tol", d.tol);
    r.integer("defect.max_iter", d.max_iter);
    r.boolean("defect.anderson", d.anderson);
    if (!has_dg) d.g_max = 2.0 * unit;
    require(d.width > 0.0, "defect.width", "must be positive");
    require(d.m >= 1, "defect.m", "must be >= 1");
    require(d.g_max > 0.0, "defect.g_max", "must be positive");
    require(d.mix > 0.0 && d.mix <= 1.0, "defect.mix", "must be in (0, 1]");
    require(d.tol > 0.0, "defect.tol", "must be positive");
    require(d.max_iter >= 1, "defect.max_iter", "must be >= 1");

    HomogenizationSection& h = cfg.homogenization;
    r.numbers("homogenization.etas", h.etas);
    r.number("homogenization.k_radius", h.k_radius);
    r.number("homogenization.k_step", h.k_step);
    require(!h.etas.empty(), "homogenization.etas", "must list at least one value");
    for (std::size_t i = 0; i < h.etas.size(); ++i) {
        require(h.etas[i] > 0.0, "homogenization.etas", "values must be positive");
        if (i > 0) require(h.etas[i] < h.etas[i - 1], "homogenization.etas", "values must be decreasing");
    }
    require(h.k_radius > 0.0, "homogenization.k_radius", "must be positive");
    require(h.k_step > 0.0, "homogenization.k_step", "must be positive");

    OutputSection& o = cfg.output;
    r.text("output.directory", o.directory);
    r.text("output.formats", o.formats);
    require(!o.directory.empty(), "output.directory", "must not be empty");
    require(o.formats == "csv", "output.formats", "only 'csv' is supported");

    r.reject_unused();
    return cfg;
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), overrides);
}

std::string emit_config(const RunConfig& cfg)
{
    auto v3 = [](const Vec3& v) { return format_number(v[0]) + " " + format_number(v[1]) + " " + format_number(v[2]); };
    std::ostringstream os;
    const auto& c = cfg.crystal;
    os << "[crystal]\n";
    os << "preset = " << c.preset << "\n";
    os << "amplitudes = " << v3(c.amplitudes) << "\n";
    os << "lattice_constant = " << format_number(c.lattice_constant) << "\n";
    os << "a1 = " << v3(c.a1) << "\n";
    os << "a2 = " << v3(c.a2) << "\n";
    os << "a3 = " << v3(c.a3) << "\n";
    os << "potential =";
    for (std::size_t i = 0; i < c.potential.size(); ++i) {
        const auto& [k, v] = c.potential[i];
        os << (i ? "; " : " ") << k[0] << " " << k[1] << " " << k[2] << " " << format_number(v.real()) << " "
           << format_number(v.imag());
    }
    os << "\n";
    os << "v0 = " << format_number(c.v0) << "\n";
    os << "n_electrons = " << c.n_electrons << "\n\n";

    const auto& n = cfg.numerics;
    os << "[numerics]\n";
    os << "g_max = " << format_number(n.g_max) << "\n";
    os << "n_k = " << n.n_k << "\n";
    os << "gap_tol = " << format_number(n.gap_tol) << "\n";
    os << "contour_nodes = " << n.contour_nodes << "\n";
    os << "eta0 = " << format_number(n.eta0) << "\n";
    os << "phase = " << n.phase << "\n";
    os << "seed = " << n.seed << "\n\n";

    const auto& d = cfg.defect;
    os << "[defect]\n";
    os << "charge = " << format_number(d.charge) << "\n";
    os << "width = " << format_number(d.width) << "\n";
    os << "center = " << v3(d.center) << "\n";
    os << "m = " << d.m << "\n";
    os << "g_max = " << format_number(d.g_max) << "\n";
    os << "mix = " << format_number(d.mix) << "\n";
    os << "tol = " << format_number(d.tol) << "\n";
    os << "max_iter = " << d.max_iter << "\n";
    os << "anderson = " << (d.anderson ? "true" : "false") << "\n\n";

    const auto& h = cfg.homogenization;
    os << "[homogenization]\n";
    os << "etas =";
    for (double e : h.etas) os << " " << format_number(e);
    os << "\n";
    os << "k_radius = " << format_number(h.k_radius) << "\n";
    os << "k_step = " << format_number(h.k_step) << "\n\n";

    os << "[output]\n";
    os << "directory = " << cfg.output.directory << "\n";
    os << "formats = " << cfg.output.formats << "\n";
    return os.str();
}

std::string config_hash(const RunConfig& cfg)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : emit_config(cfg)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

CrystalModel build_model(const RunConfig& cfg)
{
    const auto& c = cfg.crystal;
    if (c.preset == "mathieu") return mathieu_model(c.amplitudes, c.lattice_constant, c.n_electrons, c.v0);
    CrystalModel model;
    model.lattice = build_lattice(c.a1, c.a2, c.a3);
    model.n_electrons = c.n_electrons;
    for (const auto& [k, v] : c.potential) model.v_fourier[k] += v;
    if (c.v0 != 0.0) model.v_fourier[{0, 0, 0}] += c.v0;
    model.validate();
    return model;
}

BandOptions band_options(const RunConfig& cfg)
{
    BandOptions o;
    o.phase = cfg.numerics.phase == "seeded_random" ? PhaseConvention::SeededRandom : PhaseConvention::LargestReal;
    o.seed = static_cast<unsigned long long>(cfg.numerics.seed);
    return o;
}

} // namespace rhf

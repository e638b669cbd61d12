#include "mcontrol/problem.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mcontrol/errors.hpp"

namespace mcontrol {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const char* where, const std::set<std::string>& allowed)
{
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValidationError(std::string(where) + ": unknown field '" + it.key() + "'");
}

double get_number(const json& j, const char* where, const char* key, double fallback,
                  bool required = false)
{
    if (!j.contains(key)) {
        if (required)
            throw ValidationError(std::string(where) + ": missing field '" + key + "'");
        return fallback;
    }
    if (!j[key].is_number())
        throw ValidationError(std::string(where) + ": field '" + key + "' must be a number");
    return j[key].get<double>();
}

int get_int(const json& j, const char* where, const char* key, int fallback)
{
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer())
        throw ValidationError(std::string(where) + ": field '" + key + "' must be an integer");
    return j[key].get<int>();
}

std::vector<double> get_vector(const json& j, const char* where, const char* key)
{
    if (!j.contains(key) || !j[key].is_array())
        throw ValidationError(std::string(where) + ": field '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number())
            throw ValidationError(std::string(where) + ": '" + key + "' entries must be numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

SpectrumSpec parse_spectrum(const json& j, const char* where)
{
    if (!j.is_object()) throw ValidationError(std::string(where) + ": must be an object");
    check_keys(j, where, {"kind", "count", "shift", "values"});
    SpectrumSpec s;
    s.kind = j.value("kind", "explicit");
    if (s.kind == "explicit") {
        s.values = get_vector(j, where, "values");
        s.count = get_int(j, where, "count", static_cast<int>(s.values.size()));
        if (s.count != static_cast<int>(s.values.size()))
            throw ValidationError(std::string(where) + ": declared count does not match values");
    } else if (s.kind == "square" || s.kind == "shifted_square") {
        s.count = get_int(j, where, "count", 0);
        s.shift = get_number(j, where, "shift", 0.0);
        if (s.count < 1)
            throw ValidationError(std::string(where) + ": generator needs count >= 1");
    } else {
        throw ValidationError(std::string(where) + ": unknown spectrum kind '" + s.kind + "'");
    }
    return s;
}

SequenceSpec parse_sequence(const json& j, const char* where)
{
    if (!j.is_object()) throw ValidationError(std::string(where) + ": must be an object");
    check_keys(j, where, {"kind", "scale", "rate", "stride", "offset", "values"});
    SequenceSpec s;
    s.kind = j.value("kind", "zero");
    if (s.kind == "explicit") {
        s.values = get_vector(j, where, "values");
    } else if (s.kind == "zero") {
        // nothing else
    } else if (s.kind == "alternating_over_m" || s.kind == "one_over_index" ||
               s.kind == "exp_index_decay") {
        s.scale = get_number(j, where, "scale", 1.0);
        s.rate = get_number(j, where, "rate", 1.0);
        s.stride = get_int(j, where, "stride", 1);
        s.offset = get_int(j, where, "offset", 1);
        if (s.stride < 1 || s.offset < 1)
            throw ValidationError(std::string(where) + ": stride and offset must be >= 1");
    } else {
        throw ValidationError(std::string(where) + ": unknown sequence kind '" + s.kind + "'");
    }
    return s;
}

CouplingSpec parse_coupling(const json& j, const char* where)
{
    if (!j.is_object()) throw ValidationError(std::string(where) + ": must be an object");
    check_keys(j, where, {"kind", "alpha", "rows"});
    CouplingSpec c;
    c.kind = j.value("kind", "identity_scaled");
    if (c.kind == "identity_scaled") {
        c.alpha = get_number(j, where, "alpha", 1.0);
    } else if (c.kind == "dense") {
        if (!j.contains("rows") || !j["rows"].is_array())
            throw ValidationError(std::string(where) + ": dense coupling needs 'rows'");
        for (const auto& row : j["rows"]) {
            if (!row.is_array())
                throw ValidationError(std::string(where) + ": each coupling row must be an array");
            std::vector<double> r;
            for (const auto& v : row) {
                if (!v.is_number())
                    throw ValidationError(std::string(where) + ": coupling entries must be numbers");
                r.push_back(v.get<double>());
            }
            c.rows.push_back(std::move(r));
        }
    } else {
        throw ValidationError(std::string(where) + ": unknown coupling kind '" + c.kind + "'");
    }
    return c;
}

ordered_json emit_spectrum(const SpectrumSpec& s)
{
    ordered_json j;
    j["kind"] = s.kind;
    if (s.kind == "explicit") {
        j["values"] = s.values;
    } else {
        j["count"] = s.count;
        if (s.kind == "shifted_square") j["shift"] = s.shift;
    }
    return j;
}

ordered_json emit_sequence(const SequenceSpec& s)
{
    ordered_json j;
    j["kind"] = s.kind;
    if (s.kind == "explicit") {
        j["values"] = s.values;
    } else if (s.kind != "zero") {
        j["scale"] = s.scale;
        if (s.kind == "exp_index_decay") j["rate"] = s.rate;
        j["stride"] = s.stride;
        j["offset"] = s.offset;
    }
    return j;
}

ordered_json emit_coupling(const CouplingSpec& c)
{
    ordered_json j;
    j["kind"] = c.kind;
    if (c.kind == "identity_scaled")
        j["alpha"] = c.alpha;
    else
        j["rows"] = c.rows;
    return j;
}

} // namespace

std::vector<double> expand_spectrum(const SpectrumSpec& spec)
{
    if (spec.kind == "explicit") return spec.values;
    std::vector<double> out;
    out.reserve(spec.count);
    for (int m = 1; m <= spec.count; ++m) {
        const double sq = -static_cast<double>(m) * m;
        out.push_back(spec.kind == "shifted_square" ? spec.shift + sq : sq);
    }
    return out;
}

std::vector<double> expand_sequence(const SequenceSpec& spec, int count)
{
    if (spec.kind == "explicit") {
        if (static_cast<int>(spec.values.size()) != count) {
            std::ostringstream msg;
            msg << "sequence has " << spec.values.size() << " values, expected " << count;
            throw ValidationError(msg.str());
        }
        return spec.values;
    }
    std::vector<double> out;
    out.reserve(count);
    for (int m = 1; m <= count; ++m) {
        const double idx = spec.offset + static_cast<double>(spec.stride) * (m - 1);
        if (spec.kind == "zero")
            out.push_back(0.0);
        else if (spec.kind == "alternating_over_m")
            out.push_back(spec.scale * ((m % 2 == 1) ? 1.0 : -1.0) / idx);
        else if (spec.kind == "one_over_index")
            out.push_back(spec.scale / idx);
        else // exp_index_decay
            out.push_back(spec.scale * std::exp(-spec.rate * idx));
    }
    return out;
}

ProblemFile parse_problem_json(const json& j)
{
    if (!j.is_object()) throw ValidationError("problem: top level must be an object");
    check_keys(j, "problem",
               {"schema", "name", "spec_y", "spec_z", "coupling", "b_y", "b_z", "x0_y",
                "x0_z", "t1", "n_synth", "n_verify", "tolerances"});

    ProblemFile pf;
    pf.schema = get_int(j, "problem", "schema", 1);
    if (pf.schema != 1) throw ValidationError("problem: unsupported schema version");
    pf.name = j.value("name", "");

    if (!j.contains("spec_y") || !j.contains("spec_z"))
        throw ValidationError("problem: spec_y and spec_z are required");
    pf.spec_y = parse_spectrum(j["spec_y"], "spec_y");
    pf.spec_z = parse_spectrum(j["spec_z"], "spec_z");
    pf.coupling = j.contains("coupling") ? parse_coupling(j["coupling"], "coupling")
                                         : CouplingSpec{};
    pf.b_y = j.contains("b_y") ? parse_sequence(j["b_y"], "b_y") : SequenceSpec{};
    pf.b_z = j.contains("b_z") ? parse_sequence(j["b_z"], "b_z") : SequenceSpec{};
    pf.x0_y = j.contains("x0_y") ? parse_sequence(j["x0_y"], "x0_y") : SequenceSpec{};
    pf.x0_z = j.contains("x0_z") ? parse_sequence(j["x0_z"], "x0_z") : SequenceSpec{};
    pf.t1 = get_number(j, "problem", "t1", 1.0);
    pf.n_synth = get_int(j, "problem", "n_synth", 0);
    pf.n_verify = get_int(j, "problem", "n_verify", 0);

    if (j.contains("tolerances")) {
        const json& t = j["tolerances"];
        check_keys(t, "tolerances", {"overlap_tol", "resonance_guard", "verify_tol", "tikhonov"});
        pf.tolerances.overlap_tol = get_number(t, "tolerances", "overlap_tol", -1.0);
        pf.tolerances.resonance_guard = get_number(t, "tolerances", "resonance_guard", -1.0);
        pf.tolerances.verify_tol = get_number(t, "tolerances", "verify_tol", 1e-6);
        pf.tolerances.tikhonov = get_number(t, "tolerances", "tikhonov", 0.0);
    }

    std::vector<std::string> issues;
    if (!(pf.t1 > 0.0)) issues.push_back("t1 must be positive");
    if (pf.n_synth < 0) issues.push_back("n_synth must be nonnegative");
    if (pf.n_verify < 0) issues.push_back("n_verify must be nonnegative");
    if (!(pf.tolerances.verify_tol > 0.0)) issues.push_back("verify_tol must be positive");
    if (pf.tolerances.tikhonov < 0.0) issues.push_back("tikhonov must be nonnegative");
    if (!issues.empty()) {
        std::string msg = "problem validation failed:";
        for (const auto& s : issues) msg += "\n  - " + s;
        throw ValidationError(msg);
    }
    return pf;
}

ProblemFile parse_problem(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open problem file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("problem file is not valid JSON: ") + e.what());
    }
    return parse_problem_json(j);
}

ordered_json emit_problem(const ProblemFile& pf)
{
    ordered_json j;
    j["schema"] = pf.schema;
    j["name"] = pf.name;
    j["spec_y"] = emit_spectrum(pf.spec_y);
    j["spec_z"] = emit_spectrum(pf.spec_z);
    j["coupling"] = emit_coupling(pf.coupling);
    j["b_y"] = emit_sequence(pf.b_y);
    j["b_z"] = emit_sequence(pf.b_z);
    j["x0_y"] = emit_sequence(pf.x0_y);
    j["x0_z"] = emit_sequence(pf.x0_z);
    j["t1"] = pf.t1;
    j["n_synth"] = pf.n_synth;
    j["n_verify"] = pf.n_verify;
    j["tolerances"] = ordered_json{{"overlap_tol", pf.tolerances.overlap_tol},
                                   {"resonance_guard", pf.tolerances.resonance_guard},
                                   {"verify_tol", pf.tolerances.verify_tol},
                                   {"tikhonov", pf.tolerances.tikhonov}};
    return j;
}

CoupledModel model_from_problem(const ProblemFile& pf)
{
    const std::vector<double> ly = expand_spectrum(pf.spec_y);
    const std::vector<double> lz = expand_spectrum(pf.spec_z);
    const int ny = static_cast<int>(ly.size());
    const int nz = static_cast<int>(lz.size());

    Eigen::MatrixXd C;
    if (pf.coupling.kind == "identity_scaled") {
        C = Eigen::MatrixXd::Zero(ny, nz);
        for (int i = 0; i < std::min(ny, nz); ++i) C(i, i) = pf.coupling.alpha;
    } else {
        if (static_cast<int>(pf.coupling.rows.size()) != ny)
            throw ValidationError("coupling: row count must equal the Y mode count");
        C.resize(ny, nz);
        for (int i = 0; i < ny; ++i) {
            if (static_cast<int>(pf.coupling.rows[i].size()) != nz)
                throw ValidationError("coupling: every row must have one entry per Z mode");
            for (int k = 0; k < nz; ++k) C(i, k) = pf.coupling.rows[i][k];
        }
    }

    const std::vector<double> by = expand_sequence(pf.b_y, ny);
    const std::vector<double> bz = expand_sequence(pf.b_z, nz);
    return build_coupled_model({ly, {}}, {lz, {}}, std::move(C),
                               Eigen::Map<const Eigen::VectorXd>(by.data(), ny),
                               Eigen::Map<const Eigen::VectorXd>(bz.data(), nz), pf.t1);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> x0_from_problem(const ProblemFile& pf)
{
    const int ny = pf.spec_y.kind == "explicit" ? static_cast<int>(pf.spec_y.values.size())
                                                : pf.spec_y.count;
    const int nz = pf.spec_z.kind == "explicit" ? static_cast<int>(pf.spec_z.values.size())
                                                : pf.spec_z.count;
    const std::vector<double> xy = expand_sequence(pf.x0_y, ny);
    const std::vector<double> xz = expand_sequence(pf.x0_z, nz);
    return {Eigen::Map<const Eigen::VectorXd>(xy.data(), ny),
            Eigen::Map<const Eigen::VectorXd>(xz.data(), nz)};
}

ProblemFile preset_example1(int modes, double t1, bool plain_pi_b)
{
    ProblemFile pf;
    pf.name = plain_pi_b ? "example1-plain-pi-b" : "example1";
    pf.spec_y = {"shifted_square", modes, 1.0, {}};
    pf.spec_z = {"square", modes, 0.0, {}};
    pf.coupling = {"identity_scaled", 1.0, {}};
    // b(x) = x against the sine basis: the normalized convention carries
    // sqrt(2/pi), the plain table prints pi (-1)^(m-1)/m.
    const double scale = plain_pi_b ? M_PI : std::sqrt(2.0 / M_PI) * M_PI;
    pf.b_y = {"alternating_over_m", scale, 1.0, 1, 1, {}};
    pf.b_z = {"zero", 1.0, 1.0, 1, 1, {}};
    // interleaved enumeration: Y modes sit at 1, 3, 5, ... and Z modes at
    // 2, 4, 6, ... so x0_j = 1/j splits into the two strided sequences
    pf.x0_y = {"one_over_index", 1.0, 1.0, 2, 1, {}};
    pf.x0_z = {"one_over_index", 1.0, 1.0, 2, 2, {}};
    pf.t1 = t1;
    pf.n_synth = std::min(8, modes);
    pf.n_verify = std::min(2 * pf.n_synth, modes);
    return pf;
}

ProblemFile preset_example2(int modes, double alpha, double t1)
{
    ProblemFile pf;
    pf.name = "example2";
    pf.spec_y = {"square", modes, 0.0, {}};
    pf.spec_z = {"square", modes, 0.0, {}};
    pf.coupling = {"identity_scaled", alpha, {}};
    pf.b_y = {"one_over_index", 1.0, 1.0, 1, 1, {}};
    pf.b_z = {"zero", 1.0, 1.0, 1, 1, {}};
    pf.x0_y = {"zero", 1.0, 1.0, 1, 1, {}};
    pf.x0_z = {"exp_index_decay", 1.0, 1.0, 1, 1, {}};
    pf.t1 = t1;
    pf.n_synth = std::min(6, modes);
    pf.n_verify = std::min(2 * pf.n_synth, modes);
    return pf;
}

} // namespace mcontrol

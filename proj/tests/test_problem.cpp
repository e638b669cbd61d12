#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mcontrol/errors.hpp"
#include "mcontrol/pipeline.hpp"
#include "mcontrol/problem.hpp"

using namespace mcontrol;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    out << text;
}

struct CliRun {
    int exit_code;
    std::string output;
};

CliRun run_cli(const std::string& args)
{
    const std::string out_path = "/tmp/mcontrol_cli_out.txt";
    const std::string cmd =
        std::string(MCONTROL_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    const int code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return {code, slurp(out_path)};
}

} // namespace

TEST_CASE("sequence generators expand as documented")
{
    SequenceSpec alt{"alternating_over_m", 2.0, 1.0, 1, 1, {}};
    const auto a = expand_sequence(alt, 4);
    CHECK(a[0] == 2.0);
    CHECK(a[1] == -1.0);
    CHECK(a[2] == doctest::Approx(2.0 / 3.0));
    CHECK(a[3] == -0.5);

    SequenceSpec odd{"one_over_index", 1.0, 1.0, 2, 1, {}};
    const auto o = expand_sequence(odd, 3);
    CHECK(o[0] == 1.0);
    CHECK(o[1] == doctest::Approx(1.0 / 3.0));
    CHECK(o[2] == 0.2);

    SequenceSpec dec{"exp_index_decay", 1.0, 1.0, 1, 1, {}};
    const auto d = expand_sequence(dec, 2);
    CHECK(d[0] == doctest::Approx(std::exp(-1.0)));
    CHECK(d[1] == doctest::Approx(std::exp(-2.0)));

    SequenceSpec expl{"explicit", 1.0, 1.0, 1, 1, {1.0, 2.0}};
    CHECK_THROWS_AS(expand_sequence(expl, 3), ValidationError);
}

TEST_CASE("preset example1 expands to the interleaved heat pair")
{
    const auto pf = preset_example1(8);
    const auto model = model_from_problem(pf);
    CHECK(model.ny() == 8);
    CHECK(model.nz() == 8);
    for (int m = 1; m <= 8; ++m) {
        CHECK(model.spec_y.eigenvalues[m - 1] == 1.0 - m * m);
        CHECK(model.spec_z.eigenvalues[m - 1] == -1.0 * m * m);
        const double expected = std::sqrt(2.0 / M_PI) * M_PI * ((m % 2 == 1) ? 1.0 : -1.0) / m;
        CHECK(model.b_y[m - 1] == doctest::Approx(expected).epsilon(1e-15));
        CHECK(model.b_z[m - 1] == 0.0);
    }
    const auto [x0y, x0z] = x0_from_problem(pf);
    for (int m = 1; m <= 8; ++m) {
        CHECK(x0y[m - 1] == doctest::Approx(1.0 / (2.0 * m - 1.0)));
        CHECK(x0z[m - 1] == doctest::Approx(1.0 / (2.0 * m)));
    }
    // the plain-pi convention only rescales b
    const auto plain = model_from_problem(preset_example1(8, 1.0, true));
    CHECK(plain.b_y[0] == doctest::Approx(M_PI).epsilon(1e-15));
}

TEST_CASE("preset example2 expands to the matched pair system")
{
    const auto pf = preset_example2(6, 1.25);
    const auto model = model_from_problem(pf);
    for (int n = 1; n <= 6; ++n) {
        CHECK(model.spec_y.eigenvalues[n - 1] == -1.0 * n * n);
        CHECK(model.spec_z.eigenvalues[n - 1] == -1.0 * n * n);
        CHECK(model.coupling(n - 1, n - 1) == 1.25);
        CHECK(model.b_y[n - 1] == doctest::Approx(1.0 / n));
    }
    const auto [x0y, x0z] = x0_from_problem(pf);
    CHECK(x0y.isZero(0.0));
    for (int n = 1; n <= 6; ++n) CHECK(x0z[n - 1] == doctest::Approx(std::exp(-1.0 * n)));
}

TEST_CASE("problem files round-trip canonically")
{
    const auto pf = preset_example1(6);
    const auto emitted = dump_json_17(emit_problem(pf));
    const auto reparsed = parse_problem_json(json::parse(emitted));
    const auto emitted2 = dump_json_17(emit_problem(reparsed));
    CHECK(emitted == emitted2);

    // sparse input files canonicalize to the same full form
    const char* sparse = R"({
      "spec_y": {"kind": "explicit", "values": [-1.0]},
      "spec_z": {"kind": "explicit", "values": [-2.0]},
      "coupling": {"kind": "dense", "rows": [[1.0]]},
      "b_y": {"kind": "explicit", "values": [1.0]},
      "t1": 1.0
    })";
    const auto pf2 = parse_problem_json(json::parse(sparse));
    const auto once = dump_json_17(emit_problem(pf2));
    const auto twice = dump_json_17(emit_problem(parse_problem_json(json::parse(once))));
    CHECK(once == twice);
    CHECK(model_from_problem(pf2).ny() == 1);
}

TEST_CASE("problem validation failures")
{
    CHECK_THROWS_AS(parse_problem_json(json::parse(R"({"spec_y": {"kind": "explicit",
        "values": [-1.0]}})")),
                    ValidationError); // missing spec_z
    CHECK_THROWS_AS(parse_problem_json(json::parse(R"({"schema": 9, "spec_y":
        {"kind": "explicit", "values": [-1.0]}, "spec_z": {"kind": "explicit",
        "values": [-2.0]}})")),
                    ValidationError);
    CHECK_THROWS_AS(parse_problem_json(json::parse(R"({"spec_y": {"kind": "banana"},
        "spec_z": {"kind": "square", "count": 2}})")),
                    ValidationError);
    CHECK_THROWS_AS(parse_problem_json(json::parse(R"({"spec_y": {"kind": "square",
        "count": 2}, "spec_z": {"kind": "square", "count": 2}, "typo_field": 1})")),
                    ValidationError);

    // coupling rows of the wrong length surface when the model is built
    const char* bad_rows = R"({
      "spec_y": {"kind": "explicit", "values": [-1.0, -2.0]},
      "spec_z": {"kind": "explicit", "values": [-3.0, -4.0]},
      "coupling": {"kind": "dense", "rows": [[1.0], [1.0, 0.0]]},
      "b_y": {"kind": "explicit", "values": [1.0, 1.0]},
      "t1": 1.0
    })";
    CHECK_THROWS_AS(model_from_problem(parse_problem_json(json::parse(bad_rows))),
                    ValidationError);
}

TEST_CASE("parse_problem reports syntax and io errors")
{
    spit("/tmp/mcontrol_bad.json", "{ not json");
    CHECK_THROWS_AS(parse_problem("/tmp/mcontrol_bad.json"), ParseError);
    CHECK_THROWS_AS(parse_problem("/tmp/does_not_exist_mcontrol.json"), ParseError);
}

TEST_CASE("run_pipeline produces the requested sections")
{
    const auto pf = preset_example1(8);
    const auto spec = run_pipeline(pf, "spectrum");
    CHECK(spec.report.contains("spectrum"));
    CHECK_FALSE(spec.report.contains("analysis"));
    CHECK(spec.exit_code == 0);

    const auto rep = run_pipeline(pf, "report");
    for (const char* key : {"spectrum", "analysis", "synthesis", "verification"})
        CHECK(rep.report.contains(key));
    CHECK(rep.exit_code == 0);
    CHECK(rep.report["verification"]["verdict"].get<bool>());
    CHECK(rep.solution.has_value());

    CHECK_THROWS_AS(run_pipeline(pf, "dance"), ValidationError);
}

TEST_CASE("run_pipeline exit code distinguishes a failed verdict")
{
    auto pf = preset_example1(8);
    pf.tolerances.verify_tol = 1e-30; // unattainably strict
    const auto res = run_pipeline(pf, "verify");
    CHECK(res.exit_code == 2);
    CHECK_FALSE(res.report["verification"]["verdict"].get<bool>());
}

TEST_CASE("json dump uses 17-significant-digit round-trip floats")
{
    nlohmann::ordered_json j;
    j["x"] = 0.1;
    j["y"] = 1.0 / 3.0;
    j["n"] = 7;
    const std::string text = dump_json_17(j);
    const auto back = json::parse(text);
    CHECK(back["x"].get<double>() == 0.1);
    CHECK(back["y"].get<double>() == 1.0 / 3.0);
    CHECK(back["n"].get<int>() == 7);
}

TEST_CASE("control_csv emits the documented shape")
{
    const ExponentialSum u({{1.0, -1.0, 0, 0.0}});
    const std::string csv = control_csv(u, 1.0, 5);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,u");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5);
}

TEST_CASE("cli: demo run is deterministic and writes artifacts")
{
    const auto r1 = run_cli("demo example1 --modes 8 --json /tmp/mc_rep1.json "
                            "--emit-control /tmp/mc_u.csv --samples 50 "
                            "--emit-problem /tmp/mc_prob.json");
    REQUIRE(r1.exit_code == 0);
    const auto r2 = run_cli("demo example1 --modes 8 --json /tmp/mc_rep2.json");
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp("/tmp/mc_rep1.json") == slurp("/tmp/mc_rep2.json"));

    const auto rep = json::parse(slurp("/tmp/mc_rep1.json"));
    CHECK(rep["verification"]["verdict"].get<bool>());
    CHECK(rep["problem"]["name"] == "example1");

    std::istringstream csv(slurp("/tmp/mc_u.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "t,u");

    const auto prob = json::parse(slurp("/tmp/mc_prob.json"));
    CHECK(prob["spec_y"]["kind"] == "shifted_square");

    // the emitted problem file reloads through --problem
    const auto r3 = run_cli("verify --problem /tmp/mc_prob.json");
    CHECK(r3.exit_code == 0);
}

TEST_CASE("cli: error paths exit with code 1, failed verdicts with 2")
{
    CHECK(run_cli("verify --problem /tmp/definitely_missing.json").exit_code == 1);
    CHECK(run_cli("spectrum").exit_code == 1); // neither --problem nor --demo
    CHECK(run_cli("demo nosuchpreset").exit_code == 1);

    auto pf = preset_example1(8);
    pf.tolerances.verify_tol = 1e-30;
    spit("/tmp/mc_strict.json", dump_json_17(emit_problem(pf)));
    CHECK(run_cli("verify --problem /tmp/mc_strict.json").exit_code == 2);
}

TEST_CASE("cli: MCONTROL_THREADS does not change the report bytes")
{
    const auto r1 = run_cli("report --demo example1 --modes 10 --json /tmp/mc_th1.json");
    REQUIRE(r1.exit_code == 0);
    const std::string cmd = std::string("MCONTROL_THREADS=4 ") + MCONTROL_CLI_PATH +
                            " report --demo example1 --modes 10 --json /tmp/mc_th4.json "
                            "> /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(slurp("/tmp/mc_th1.json") == slurp("/tmp/mc_th4.json"));
}

TEST_CASE("cli: --n-gram controls the analyze cutout depth")
{
    const auto r = run_cli("analyze --demo example1 --modes 12 --n-gram 10 "
                           "--json /tmp/mc_ngram.json");
    REQUIRE(r.exit_code == 0);
    const auto rep = json::parse(slurp("/tmp/mc_ngram.json"));
    CHECK(rep["analysis"]["gram"]["n_max"].get<int>() == 10);
}

TEST_CASE("cli: example2 demo honors --alpha and --n-synth")
{
    const auto r = run_cli("demo example2 --modes 10 --alpha 2.0 --n-synth 5 "
                           "--json /tmp/mc_e2.json");
    REQUIRE(r.exit_code == 0);
    const auto rep = json::parse(slurp("/tmp/mc_e2.json"));
    CHECK(rep["spectrum"]["pairs"][0]["c_m"].get<double>() == 2.0);
    CHECK(rep["synthesis"]["n_synth"].get<int>() == 5);
    CHECK(rep["verification"]["verdict"].get<bool>());
}

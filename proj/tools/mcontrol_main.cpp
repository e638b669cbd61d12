#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mcontrol/errors.hpp"
#include "mcontrol/pipeline.hpp"

namespace {

struct CliArgs {
    std::string problem_path;
    std::string demo_name;
    int modes = 0;
    double alpha = 1.0;
    bool alpha_set = false;
    double t1 = 0.0;
    double tikhonov = -1.0;
    int n_synth = 0;
    int n_verify = 0;
    double rho = -1.0;
    int n_gram = 0;
    bool plain_pi_b = false;
    std::string emit_control_path;
    int samples = 1000;
    std::string json_path;
    std::string emit_problem_path;
};

void add_common_options(CLI::App* cmd, CliArgs& args, bool with_demo_option)
{
    if (with_demo_option) {
        cmd->add_option("--problem", args.problem_path, "problem file (JSON)");
        cmd->add_option("--demo", args.demo_name, "built-in preset: example1 | example2");
    }
    cmd->add_option("--modes", args.modes, "modes per branch (presets / generator specs)");
    cmd->add_option("--alpha", args.alpha, "coupling strength for identity_scaled coupling")
        ->each([&args](const std::string&) { args.alpha_set = true; });
    cmd->add_option("--t1", args.t1, "control horizon override");
    cmd->add_option("--tikhonov", args.tikhonov, "ridge parameter for the moment solve");
    cmd->add_option("--n-synth", args.n_synth, "moment equations to synthesize");
    cmd->add_option("--n-verify", args.n_verify, "modes checked at verification");
    cmd->add_option("--rho", args.rho, "gap-certificate separation parameter");
    cmd->add_option("--n-gram", args.n_gram, "Gram cutout depth for analyze (default 8)");
    cmd->add_flag("--plain-pi-b", args.plain_pi_b,
                  "example1: use the plain pi/m control coefficients");
    cmd->add_option("--emit-control", args.emit_control_path, "write sampled control CSV");
    cmd->add_option("--samples", args.samples, "CSV sample count (default 1000)");
    cmd->add_option("--json", args.json_path, "write the machine-readable report");
    cmd->add_option("--emit-problem", args.emit_problem_path,
                    "write the canonicalized problem file");
}

mcontrol::ProblemFile load_problem(const CliArgs& args)
{
    using namespace mcontrol;
    ProblemFile pf;
    if (!args.problem_path.empty() && !args.demo_name.empty())
        throw ValidationError("--problem and --demo are mutually exclusive");
    if (!args.problem_path.empty()) {
        pf = parse_problem(args.problem_path);
    } else if (!args.demo_name.empty()) {
        const int modes = args.modes > 0 ? args.modes : 16;
        const double t1 = args.t1 > 0.0 ? args.t1 : 1.0;
        if (args.demo_name == "example1")
            pf = preset_example1(modes, t1, args.plain_pi_b);
        else if (args.demo_name == "example2")
            pf = preset_example2(modes, args.alpha_set ? args.alpha : 1.0, t1);
        else
            throw ValidationError("unknown demo preset '" + args.demo_name + "'");
    } else {
        throw ValidationError("either --problem or --demo is required");
    }

    if (args.modes > 0 && !args.problem_path.empty()) {
        if (pf.spec_y.kind == "explicit" || pf.spec_z.kind == "explicit")
            throw ValidationError("--modes cannot override explicit eigenvalue lists");
        pf.spec_y.count = args.modes;
        pf.spec_z.count = args.modes;
    }
    if (args.alpha_set && !args.problem_path.empty()) {
        if (pf.coupling.kind != "identity_scaled")
            throw ValidationError("--alpha applies only to identity_scaled coupling");
        pf.coupling.alpha = args.alpha;
    }
    if (args.t1 > 0.0) pf.t1 = args.t1;
    if (args.tikhonov >= 0.0) pf.tolerances.tikhonov = args.tikhonov;
    if (args.n_synth > 0) pf.n_synth = args.n_synth;
    if (args.n_verify > 0) pf.n_verify = args.n_verify;
    return pf;
}

int run(const CliArgs& args, const std::string& subcommand)
{
    using namespace mcontrol;
    const ProblemFile pf = load_problem(args);

    PipelineOptions opts;
    opts.rho = args.rho;
    opts.gram_n = args.n_gram;
    if (const char* env = std::getenv("MCONTROL_THREADS"))
        opts.threads = std::max(0, std::atoi(env));

    const PipelineResult res = run_pipeline(pf, subcommand, opts);
    std::cout << res.summary;

    if (!args.json_path.empty()) {
        std::ofstream out(args.json_path);
        if (!out) throw Error("cannot write " + args.json_path);
        out << dump_json_17(res.report);
    }
    if (!args.emit_problem_path.empty()) {
        std::ofstream out(args.emit_problem_path);
        if (!out) throw Error("cannot write " + args.emit_problem_path);
        out << dump_json_17(emit_problem(pf));
    }
    if (!args.emit_control_path.empty()) {
        if (!res.solution)
            throw ValidationError("--emit-control needs a synthesizing subcommand");
        std::ofstream out(args.emit_control_path);
        if (!out) throw Error("cannot write " + args.emit_control_path);
        out << control_csv(res.solution->control, res.t1, args.samples);
    }
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"moment-method partial null-controllability toolkit"};
    app.require_subcommand(1);

    CliArgs args;
    std::string demo_positional;

    auto* spectrum = app.add_subcommand("spectrum", "eigenstructure and biorthogonality report");
    auto* analyze = app.add_subcommand("analyze", "strong-minimality and convergence diagnostics");
    auto* synthesize = app.add_subcommand("synthesize", "least-norm control for the truncated moment problem");
    auto* verify = app.add_subcommand("verify", "synthesize, then check the projected state at t1");
    auto* report = app.add_subcommand("report", "all of the above in one run");
    auto* demo = app.add_subcommand("demo", "run the full report on a built-in preset");
    for (CLI::App* cmd : {spectrum, analyze, synthesize, verify, report})
        add_common_options(cmd, args, /*with_demo_option=*/true);
    demo->add_option("preset", demo_positional, "example1 | example2")->required();
    add_common_options(demo, args, /*with_demo_option=*/false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (spectrum->parsed()) return run(args, "spectrum");
        if (analyze->parsed()) return run(args, "analyze");
        if (synthesize->parsed()) return run(args, "synthesize");
        if (verify->parsed()) return run(args, "verify");
        if (report->parsed()) return run(args, "report");
        if (demo->parsed()) {
            args.demo_name = demo_positional;
            return run(args, "report");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

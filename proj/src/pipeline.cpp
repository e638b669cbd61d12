#include "mcontrol/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "mcontrol/errors.hpp"
#include "mcontrol/minimality.hpp"
#include "mcontrol/simulate.hpp"

namespace mcontrol {

using nlohmann::ordered_json;

namespace {

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void dump_rec(const ordered_json& j, std::string& out, int indent, int depth)
{
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    switch (j.type()) {
    case ordered_json::value_t::object: {
        if (j.empty()) { out += "{}"; return; }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad_in + ordered_json(it.key()).dump() + ": ";
            dump_rec(it.value(), out, indent, depth + 1);
        }
        out += "\n" + pad + "}";
        return;
    }
    case ordered_json::value_t::array: {
        if (j.empty()) { out += "[]"; return; }
        out += "[\n";
        bool first = true;
        for (const auto& v : j) {
            if (!first) out += ",\n";
            first = false;
            out += pad_in;
            dump_rec(v, out, indent, depth + 1);
        }
        out += "\n" + pad + "]";
        return;
    }
    case ordered_json::value_t::number_float: {
        const double v = j.get<double>();
        out += std::isfinite(v) ? fmt17(v) : "null";
        return;
    }
    default:
        out += j.dump();
        return;
    }
}

ordered_json json_vector(const std::vector<double>& v)
{
    ordered_json arr = ordered_json::array();
    for (double x : v) arr.push_back(x);
    return arr;
}

ordered_json json_vector(const Eigen::VectorXd& v)
{
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

ordered_json spectrum_section(const CoupledModel& model, const SpectrumPartition& part,
                              const EigenSystem& eig)
{
    ordered_json sec;
    sec["n_y"] = model.ny();
    sec["n_z"] = model.nz();
    sec["unmatched_y"] = static_cast<int>(part.i_y.size());
    sec["unmatched_z"] = static_cast<int>(part.i_z.size());
    sec["matched_pairs"] = static_cast<int>(part.i_yz.size());
    sec["overlap_tol"] = part.overlap_tol;
    sec["biorthogonality_error"] = eig.biorth_error;

    ordered_json modes = ordered_json::array();
    for (const MomentMode& m : moment_mode_order(model, part)) {
        ordered_json e;
        e["id"] = m.id;
        e["lambda"] = m.lambda;
        e["kind"] = m.pair_index < 0 ? "unmatched_y" : "pair";
        modes.push_back(e);
    }
    sec["moment_modes"] = modes;

    const BCoefficients bc = b_coefficients(model, eig);
    sec["b_y_modes"] = json_vector(bc.b_y_modes);
    sec["b_z_modes"] = json_vector(bc.b_z_modes);
    if (!part.i_yz.empty()) {
        ordered_json pairs = ordered_json::array();
        for (std::size_t m = 0; m < part.i_yz.size(); ++m) {
            ordered_json e;
            e["y_mode"] = model.spec_y.labels[part.i_yz[m].first];
            e["z_mode"] = model.spec_z.labels[part.i_yz[m].second];
            e["lambda"] = eig.pairs[m].lambda;
            e["c_m"] = eig.pairs[m].c_m;
            e["second_eigenvector"] = eig.pairs[m].second_eigenvector;
            e["b1"] = bc.b1_pairs[m];
            e["b2"] = bc.b2_pairs[m];
            pairs.push_back(e);
        }
        sec["pairs"] = pairs;
    }
    return sec;
}

double auto_rho(const std::vector<double>& lambdas)
{
    std::vector<double> neg;
    for (double l : lambdas)
        if (l < 0.0) neg.push_back(l);
    if (neg.empty()) return 1.0;
    double rho = std::abs(neg.front());
    for (std::size_t i = 1; i < neg.size(); ++i)
        rho = std::min(rho, neg[i - 1] - neg[i]);
    return rho;
}

ordered_json analyze_section(const CoupledModel& model, const EigenSystem& eig,
                             const KernelFamily& family, const Eigen::VectorXd& x0_z,
                             const PipelineOptions& opts)
{
    ordered_json sec;
    const double t1 = model.t1;

    // Deeper cutouts of the rescaled family eventually sink below the
    // double-precision floor even for provably well-behaved spectra; 8 is
    // deep enough to show the trend and shallow enough to stay meaningful.
    const int n_max = opts.gram_n > 0 ? std::min(opts.gram_n, family.size())
                                      : std::min(family.size(), 8);
    const GramAnalysis ga = strong_minimality_diagnostic(family, t1, n_max, opts.threads);
    ordered_json gram;
    gram["n_max"] = ga.n_max;
    gram["lambda1"] = json_vector(ga.lambda1_seq);
    gram["lambda_n"] = json_vector(ga.lambdan_seq);
    gram["lambda1_normalized"] = json_vector(ga.lambda1_normalized_seq);
    gram["kernel_norms"] = json_vector(ga.norms);
    gram["lower_bound"] = ga.lower_bound;
    gram["verdict"] = to_string(ga.verdict);
    gram["family_scaled"] = family.scaled;
    sec["gram"] = gram;

    try {
        const BiorthFit bf =
            biorthogonal_norms(family, t1, n_max, {t1 / 8.0, t1 / 4.0, t1 / 2.0});
        ordered_json bio;
        bio["q_norms"] = json_vector(bf.q_norms);
        ordered_json fits = ordered_json::array();
        for (const auto& f : bf.fits)
            fits.push_back(ordered_json{{"epsilon", f.epsilon},
                                        {"k_epsilon", f.k_epsilon},
                                        {"satisfied", f.satisfied}});
        bio["fits"] = fits;
        sec["biorthogonal"] = bio;
    } catch (const SingularGram& e) {
        sec["biorthogonal"] = ordered_json{{"error", e.what()}};
    }

    const BCoefficients bc = b_coefficients(model, eig);
    std::vector<double> bvals, lambdas;
    for (const MomentMode& m : family.modes) {
        bvals.push_back(m.pair_index < 0 ? bc.b_y_modes[m.iy_pos]
                                         : bc.b1_pairs[m.pair_index]);
        lambdas.push_back(m.lambda);
    }
    try {
        const DirichletAbscissa da = dirichlet_abscissa(bvals, lambdas);
        ordered_json dj;
        dj["sequence"] = json_vector(da.sequence);
        dj["limit"] = da.limit;
        dj["zero_coefficient_modes"] = da.zero_modes;
        dj["skipped_modes"] = da.skipped_modes;
        sec["dirichlet_abscissa"] = dj;
    } catch (const ZeroCoefficient& e) {
        sec["dirichlet_abscissa"] = ordered_json{{"error", e.what()}};
    }

    const double rho = opts.rho > 0.0 ? opts.rho : auto_rho(lambdas);
    try {
        const GapCertificate gc = gap_certificate(lambdas, rho);
        ordered_json gj;
        gj["rho"] = gc.rho;
        gj["min_modulus_ok"] = gc.min_modulus_ok;
        gj["pairwise_gap_ok"] = gc.pairwise_gap_ok;
        gj["reciprocal_sum"] = gc.reciprocal_sum;
        gj["tail_exponent"] = gc.tail_exponent;
        gj["tail_bound"] = gc.tail_bound;
        gj["reciprocal_sum_finite"] = gc.reciprocal_sum_finite;
        gj["all_ok"] = gc.all_ok;
        gj["excluded_nonnegative_modes"] = gc.excluded_nonnegative;
        sec["gap_certificate"] = gj;
    } catch (const ValidationError& e) {
        sec["gap_certificate"] = ordered_json{{"error", e.what()}};
    }

    const SeriesDiagnostic sd =
        series_convergence_diagnostic(model, eig, x0_z, t1, family.size());
    ordered_json sj;
    sj["partial_sums"] = json_vector(sd.partial_sums);
    sj["verdict"] = to_string(sd.verdict);
    sec["series"] = sj;
    return sec;
}

ordered_json synthesize_section(const MomentTargets& targets, const KernelFamily& family,
                                const ControlSolution& sol)
{
    ordered_json sec;
    sec["n_synth"] = sol.n_synth;
    sec["mode_ids"] = std::vector<std::string>(targets.mode_ids.begin(),
                                               targets.mode_ids.begin() + sol.n_synth);
    sec["targets"] = json_vector(std::vector<double>(targets.values.begin(),
                                                     targets.values.begin() + sol.n_synth));
    sec["targets_scaled"] = targets.scaled;
    sec["coefficients"] = json_vector(sol.coefficients);
    sec["residuals"] = json_vector(sol.residuals);
    sec["residuals_unscaled"] = json_vector(sol.residuals_unscaled);
    sec["l2_norm"] = sol.l2_norm;
    sec["condition_estimate"] = sol.condition_estimate;
    sec["ill_conditioned"] = sol.ill_conditioned;
    sec["regularization"] = sol.regularization;
    sec["regularization_fallback"] = sol.regularization_fallback;

    ordered_json terms = ordered_json::array();
    for (const ExpTerm& t : sol.control.terms())
        terms.push_back(ordered_json{{"coeff", t.coeff},
                                     {"rate", t.rate},
                                     {"degree", t.degree},
                                     {"log_weight", t.log_weight}});
    sec["control_terms"] = terms;
    (void)family;
    return sec;
}

ordered_json verify_section(const VerificationReport& rep, const KernelFamily& family)
{
    ordered_json sec;
    sec["verdict"] = rep.verdict;
    sec["tolerance"] = rep.tolerance;
    sec["n_synth"] = rep.n_synth;
    sec["n_verify"] = rep.n_verify;

    ordered_json table = ordered_json::array();
    for (int i = 0; i < rep.n_synth; ++i) {
        const int y = family.modes[i].y_index;
        table.push_back(ordered_json{{"id", family.mode_ids[i]},
                                     {"controlled", rep.controlled.y_coords[y]},
                                     {"uncontrolled", rep.uncontrolled.y_coords[y]},
                                     {"ratio", rep.ratios[i]}});
    }
    sec["modes"] = table;
    sec["spillover"] = rep.spillover;
    sec["uncontrolled_spillover"] = rep.uncontrolled_spillover;
    sec["control_induced_spillover"] = rep.control_induced_spillover;
    sec["controlled_y_norm"] = rep.controlled.y_norm_estimate;
    sec["uncontrolled_y_norm"] = rep.uncontrolled.y_norm_estimate;
    sec["controlled_y"] = json_vector(rep.controlled.y_coords);
    sec["uncontrolled_y"] = json_vector(rep.uncontrolled.y_coords);
    return sec;
}

} // namespace

std::string dump_json_17(const ordered_json& j, int indent)
{
    std::string out;
    dump_rec(j, out, indent, 0);
    out += "\n";
    return out;
}

std::string control_csv(const ExponentialSum& control, double t1, int samples)
{
    if (samples < 2) throw ValidationError("control_csv: need at least 2 samples");
    std::string out = "t,u\n";
    for (int i = 0; i < samples; ++i) {
        const double t = t1 * i / (samples - 1);
        out += fmt17(t) + "," + fmt17(evaluate(control, t)) + "\n";
    }
    return out;
}

PipelineResult run_pipeline(const ProblemFile& problem, const std::string& subcommand,
                            const PipelineOptions& options)
{
    static const std::set<std::string> known = {"spectrum", "analyze", "synthesize",
                                                "verify", "report"};
    if (!known.count(subcommand))
        throw ValidationError("run_pipeline: unknown subcommand '" + subcommand + "'");

    const CoupledModel model = model_from_problem(problem);
    const auto [x0_y, x0_z] = x0_from_problem(problem);
    const SpectrumPartition part = classify_spectra(model, problem.tolerances.overlap_tol);
    const EigenSystem eig =
        eigenstructure_overlap(model, part, problem.tolerances.resonance_guard);

    PipelineResult res;
    res.t1 = model.t1;
    res.report["schema"] = 1;
    res.report["tool"] = "mcontrol";
    res.report["subcommand"] = subcommand;
    res.report["problem"] = emit_problem(problem);

    std::ostringstream summary;
    summary << "problem '" << problem.name << "': " << model.ny() << "+" << model.nz()
            << " modes, " << part.i_yz.size() << " matched pair(s), t1 = " << model.t1
            << "\n";

    const bool want_all = subcommand == "report";
    if (want_all || subcommand == "spectrum") {
        res.report["spectrum"] = spectrum_section(model, part, eig);
        summary << "  biorthogonality deviation: " << eig.biorth_error << "\n";
    }

    const KernelFamily family = kernel_family(model, eig, part, /*scaled=*/true);

    if (want_all || subcommand == "analyze") {
        res.report["analysis"] = analyze_section(model, eig, family, x0_z, options);
        summary << "  minimality verdict: " << res.report["analysis"]["gram"]["verdict"]
                << ", series: " << res.report["analysis"]["series"]["verdict"] << "\n";
    }

    if (want_all || subcommand == "synthesize" || subcommand == "verify") {
        const int n_synth = problem.n_synth > 0 ? std::min(problem.n_synth, family.size())
                                                : family.size();
        const MomentTargets targets =
            moment_targets(model, eig, part, x0_y, x0_z, model.t1, /*scaled=*/true);
        SynthesisOptions sopt;
        sopt.n = n_synth;
        sopt.tikhonov = problem.tolerances.tikhonov;
        sopt.threads = options.threads;
        const ControlSolution sol = synthesize_control(targets, family, sopt);
        res.solution = sol;
        res.report["synthesis"] = synthesize_section(targets, family, sol);
        summary << "  synthesized " << sol.n_synth << " moments, |u| = " << sol.l2_norm
                << ", max residual = "
                << *std::max_element(sol.residuals.begin(), sol.residuals.end()) << "\n";

        if (want_all || subcommand == "verify") {
            const int n_verify =
                problem.n_verify > 0
                    ? std::min(problem.n_verify, family.size())
                    : std::min(2 * n_synth, family.size());
            const VerificationReport rep =
                verify_partial_null(model, eig, part, x0_y, x0_z, sol, model.t1, n_verify,
                                    problem.tolerances.verify_tol);
            res.report["verification"] = verify_section(rep, family);
            summary << "  verification verdict: " << (rep.verdict ? "true" : "false")
                    << " (tol " << rep.tolerance << "), spillover " << rep.spillover
                    << "\n";
            if (!rep.verdict) res.exit_code = 2;
        }
    }

    res.summary = summary.str();
    return res;
}

} // namespace mcontrol

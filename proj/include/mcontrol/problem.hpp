#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcontrol/spectrum.hpp"

namespace mcontrol {

/// Spectrum descriptor: "shifted_square" (shift - m^2), "square" (-m^2),
/// or "explicit".
struct SpectrumSpec {
    std::string kind = "explicit";
    int count = 0;
    double shift = 0.0;
    std::vector<double> values;
};

/// Coefficient-sequence descriptor shared by b and x0:
///   explicit            values as given
///   zero                all zeros
///   alternating_over_m  scale * (-1)^(m-1) / idx(m)
///   one_over_index      scale / idx(m)
///   exp_index_decay     scale * exp(-rate * idx(m))
/// with idx(m) = offset + stride * (m - 1).
struct SequenceSpec {
    std::string kind = "zero";
    double scale = 1.0;
    double rate = 1.0;
    int stride = 1;
    int offset = 1;
    std::vector<double> values;
};

/// Coupling descriptor: "identity_scaled" (alpha * I on the common modes)
/// or "dense" (explicit rows).
struct CouplingSpec {
    std::string kind = "identity_scaled";
    double alpha = 1.0;
    std::vector<std::vector<double>> rows;
};

struct ToleranceSpec {
    double overlap_tol = -1.0;      // < 0: module default
    double resonance_guard = -1.0;  // < 0: module default
    double verify_tol = 1e-6;
    double tikhonov = 0.0;
};

/// One analysis problem: everything the pipeline needs, generators kept in
/// descriptor form so files round-trip canonically.
struct ProblemFile {
    int schema = 1;
    std::string name;
    SpectrumSpec spec_y;
    SpectrumSpec spec_z;
    CouplingSpec coupling;
    SequenceSpec b_y;
    SequenceSpec b_z;
    SequenceSpec x0_y;
    SequenceSpec x0_z;
    double t1 = 1.0;
    int n_synth = 0;  // 0: all moment modes
    int n_verify = 0; // 0: 2 * n_synth, capped to mode count
    ToleranceSpec tolerances;
};

std::vector<double> expand_spectrum(const SpectrumSpec& spec);
std::vector<double> expand_sequence(const SequenceSpec& spec, int count);

ProblemFile parse_problem_json(const nlohmann::json& j);
ProblemFile parse_problem(const std::string& path);
nlohmann::ordered_json emit_problem(const ProblemFile& pf);

CoupledModel model_from_problem(const ProblemFile& pf);
std::pair<Eigen::VectorXd, Eigen::VectorXd> x0_from_problem(const ProblemFile& pf);

/// Heat pair with shifted Laplacian, identity coupling and b(x) = x:
/// spec_y = {1 - m^2}, spec_z = {-m^2}. The default b convention carries
/// the sine-basis normalization sqrt(2/pi)*pi / m; plain_pi_b selects the
/// unnormalized pi / m table instead. Both constants appear in reports.
ProblemFile preset_example1(int modes, double t1 = 1.0, bool plain_pi_b = false);

/// Equal Laplacian pair coupled through alpha * I: every eigenvalue is a
/// matched pair with a length-2 chain; b_n = 1/n, z0_n = e^{-n}.
ProblemFile preset_example2(int modes, double alpha = 1.0, double t1 = 1.0);

} // namespace mcontrol

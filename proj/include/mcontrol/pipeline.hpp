#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mcontrol/moment.hpp"
#include "mcontrol/problem.hpp"

namespace mcontrol {

struct PipelineOptions {
    int threads = 0;     // Gram-assembly threads, 0 = auto
    double rho = -1.0;   // gap-certificate rho, < 0 = auto from the spectrum
    int gram_n = 0;      // Gram cutout depth for analyze, 0 = min(size, 8)
};

struct PipelineResult {
    nlohmann::ordered_json report;
    std::string summary;               // human-readable digest
    int exit_code = 0;                 // 0 ok / verdict true, 2 verdict false
    std::optional<ControlSolution> solution;
    double t1 = 0.0;
};

/// Subcommand semantics: "spectrum" (eigenstructure + biorthogonality),
/// "analyze" (minimality suite), "synthesize", "verify", "report" (all).
PipelineResult run_pipeline(const ProblemFile& problem, const std::string& subcommand,
                            const PipelineOptions& options = {});

/// JSON text with every float printed as a 17-significant-digit decimal,
/// so written doubles round-trip bit-exactly.
std::string dump_json_17(const nlohmann::ordered_json& j, int indent = 2);

/// CSV "t,u" with `samples` uniformly spaced points on [0, t1].
std::string control_csv(const ExponentialSum& control, double t1, int samples);

} // namespace mcontrol

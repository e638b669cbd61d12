#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mcontrol/expsum.hpp"
#include "mcontrol/minimality.hpp"
#include "mcontrol/spectrum.hpp"

namespace mcontrol {

inline constexpr double solver_tol = 1e-9;
inline constexpr double cond_warn = 1e12;

/// Right-hand sides of the truncated moment problem, in moment_mode_order.
/// When scaled, d_j carries the same e^{lambda_j t1} factor as the kernel
/// family so the linear system stays consistently conditioned.
struct MomentTargets {
    std::vector<double> values;
    std::vector<std::string> mode_ids;
    std::vector<double> lambdas;
    bool scaled = true;
    std::vector<double> log_scale;
    double t1 = 0.0;

    int size() const { return static_cast<int>(values.size()); }
};

MomentTargets moment_targets(const CoupledModel& model, const EigenSystem& eig,
                             const SpectrumPartition& partition,
                             const Eigen::VectorXd& x0_y, const Eigen::VectorXd& x0_z,
                             double t1, bool scaled = true);

struct SynthesisOptions {
    int n = 0;              // number of moment equations to solve
    double tikhonov = 0.0;  // ridge parameter; 0 requests the exact least-norm solve
    int threads = 1;
};

/// Least-norm control for the first n moment equations: u = sum c_j g_j
/// with (G_n + tik I) c = d. Residuals are those of the solved (scaled)
/// formulation; residuals_unscaled maps them back through e^{-lambda_j t1}
/// and may overflow for deep modes.
struct ControlSolution {
    std::vector<double> coefficients;
    ExponentialSum control;
    double l2_norm = 0.0;
    std::vector<double> residuals;
    std::vector<double> residuals_unscaled;
    double regularization = 0.0;
    bool regularization_fallback = false;
    double condition_estimate = 0.0;
    bool ill_conditioned = false;
    int n_synth = 0;
};

ControlSolution synthesize_control(const MomentTargets& targets,
                                   const KernelFamily& family,
                                   const SynthesisOptions& options);

/// Signed moment defects recomputed from the control by closed-form
/// integration, independent of the solver path.
std::vector<double> residual_report(const ControlSolution& solution,
                                    const KernelFamily& family,
                                    const MomentTargets& targets);

} // namespace mcontrol

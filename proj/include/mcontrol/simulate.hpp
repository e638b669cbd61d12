#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mcontrol/expsum.hpp"
#include "mcontrol/moment.hpp"
#include "mcontrol/spectrum.hpp"

namespace mcontrol {

inline constexpr double default_verify_tol = 1e-6;

/// Adjoint-basis coordinates of the state at one time. For this model the
/// adjoint Y-parts are reference basis vectors, so y_coords are plain
/// reference coordinates of x_Y(t); likewise z_coords for x_Z(t).
struct StateCoordinates {
    double t = 0.0;
    Eigen::VectorXd y_coords;
    Eigen::VectorXd z_coords;
    double y_norm_estimate = 0.0;
};

/// Mild solution at time t via the spectral expansion; the Duhamel term is
/// a closed-form inner product of exponential sums, no time stepping.
StateCoordinates propagate(const CoupledModel& model, const EigenSystem& eig,
                           const SpectrumPartition& partition,
                           const Eigen::VectorXd& x0_y, const Eigen::VectorXd& x0_z,
                           const ExponentialSum& u, double t);

struct VerificationReport {
    StateCoordinates controlled;
    StateCoordinates uncontrolled;
    std::vector<double> ratios;          // |controlled| / |uncontrolled|, synthesized modes
    double spillover = 0.0;              // controlled, modes n_synth < j <= n_verify
    double uncontrolled_spillover = 0.0;
    double control_induced_spillover = 0.0;
    bool verdict = false;
    double tolerance = default_verify_tol;
    int n_synth = 0;
    int n_verify = 0;
};

/// Runs the controlled and the u = 0 baseline propagation to t1 and tests
/// whether the synthesized coordinates vanished relative to the baseline.
/// Spillover on modes beyond the synthesis truncation is reported and is
/// never folded into the verdict.
VerificationReport verify_partial_null(const CoupledModel& model, const EigenSystem& eig,
                                       const SpectrumPartition& partition,
                                       const Eigen::VectorXd& x0_y,
                                       const Eigen::VectorXd& x0_z,
                                       const ControlSolution& solution, double t1,
                                       int n_verify,
                                       double tolerance = default_verify_tol);

/// Max relative coordinate deviation of S(t+s) x0 against S(t) S(s) x0.
double semigroup_consistency_check(const CoupledModel& model, const EigenSystem& eig,
                                   const SpectrumPartition& partition,
                                   const Eigen::VectorXd& x0_y,
                                   const Eigen::VectorXd& x0_z, double s, double t);

} // namespace mcontrol

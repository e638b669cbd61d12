#include "mcontrol/moment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "mcontrol/errors.hpp"

namespace mcontrol {

MomentTargets moment_targets(const CoupledModel& model, const EigenSystem& eig,
                             const SpectrumPartition& partition,
                             const Eigen::VectorXd& x0_y, const Eigen::VectorXd& x0_z,
                             double t1, bool scaled)
{
    if (x0_y.size() != model.ny() || x0_z.size() != model.nz())
        throw DimensionMismatch("moment_targets: initial state lengths must match the model");

    const auto& nu = model.spec_z.eigenvalues;
    MomentTargets tg;
    tg.scaled = scaled;
    tg.t1 = t1;

    for (const MomentMode& mode : moment_mode_order(model, partition)) {
        const double lam = mode.lambda;
        double proj;          // (x0, psi_j), plus the secular c_j t1 term for pairs
        double sz;            // (S_Z(t1) x_Z0, psi_Zj)
        if (mode.pair_index < 0) {
            const Eigen::VectorXd& psi = eig.psi_z_for_y[mode.iy_pos];
            proj = x0_y[mode.y_index] + x0_z.dot(psi);
            sz = 0.0;
            for (int k = 0; k < model.nz(); ++k)
                sz += std::exp(nu[k] * t1) * x0_z[k] * psi[k];
        } else {
            const PairSystem& p = eig.pairs[mode.pair_index];
            const int kz = partition.i_yz[mode.pair_index].second;
            proj = x0_y[mode.y_index] + x0_z.dot(p.psi1_z) + x0_z[kz] * p.c_m * t1;
            sz = 0.0;
            for (int k = 0; k < model.nz(); ++k)
                sz += std::exp(nu[k] * t1) * x0_z[k] * p.psi1_z[k];
        }
        // unscaled: d_j = -(x0, psi_j) + e^{-lambda t1} (S_Z(t1) x_Z0, psi_Zj)
        // scaled:   e^{lambda t1} d_j = -e^{lambda t1} (x0, psi_j) + sz
        const double d = scaled ? -std::exp(lam * t1) * proj + sz
                                : -proj + std::exp(-lam * t1) * sz;
        tg.values.push_back(d);
        tg.mode_ids.push_back(mode.id);
        tg.lambdas.push_back(lam);
        tg.log_scale.push_back(scaled ? lam * t1 : 0.0);
    }
    return tg;
}

namespace {

// Residual d - M c accumulated in extended precision.
Eigen::VectorXd refined_residual(const Eigen::MatrixXd& M, const Eigen::VectorXd& c,
                                 const Eigen::VectorXd& d)
{
    const int n = static_cast<int>(d.size());
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) {
        long double acc = static_cast<long double>(d[i]);
        for (int j = 0; j < n; ++j)
            acc -= static_cast<long double>(M(i, j)) * static_cast<long double>(c[j]);
        r[i] = static_cast<double>(acc);
    }
    return r;
}

} // namespace

ControlSolution synthesize_control(const MomentTargets& targets,
                                   const KernelFamily& family,
                                   const SynthesisOptions& options)
{
    const int n = options.n;
    if (n < 1 || n > family.size() || n > targets.size())
        throw DimensionMismatch("synthesize_control: n exceeds family or target size");
    if (targets.scaled != family.scaled)
        throw ValidationError("synthesize_control: targets and family scaling flags differ");
    if (!(options.tikhonov >= 0.0))
        throw ValidationError("synthesize_control: tikhonov must be nonnegative");

    const double t1 = family.t1;
    const Eigen::MatrixXd G = gram_matrix(family, t1, n, options.threads);
    const Eigen::VectorXd d =
        Eigen::Map<const Eigen::VectorXd>(targets.values.data(), n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw EigensolverFailure("synthesize_control: eigensolver failed on Gram cutout");
    const double lam1 = es.eigenvalues()(0);
    const double lamn = es.eigenvalues()(n - 1);
    const bool singular =
        !(lam1 > n * std::numeric_limits<double>::epsilon() * std::max(lamn, 0.0));

    ControlSolution sol;
    sol.n_synth = n;
    sol.regularization = options.tikhonov;
    if (options.tikhonov == 0.0 && singular) {
        sol.regularization = 1e-12 * G.trace() / n; // fallback, flagged
        sol.regularization_fallback = true;
    }

    Eigen::MatrixXd M = G;
    if (sol.regularization > 0.0)
        M.diagonal().array() += sol.regularization;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success)
        throw SingularGram("synthesize_control: Gram cutout is numerically rank-deficient");

    Eigen::VectorXd c = ldlt.solve(d);
    for (int pass = 0; pass < 2; ++pass)
        c += ldlt.solve(refined_residual(M, c, d));
    if (!c.allFinite())
        throw SingularGram("synthesize_control: solve produced non-finite coefficients");

    sol.coefficients.assign(c.data(), c.data() + n);
    sol.condition_estimate = lamn / std::max(lam1 + sol.regularization,
                                             std::numeric_limits<double>::min());
    sol.ill_conditioned = sol.condition_estimate > cond_warn;

    ExponentialSum u;
    for (int j = 0; j < n; ++j)
        u = scale_add(1.0, u, c[j], family.kernels[j]);
    sol.control = u;
    sol.l2_norm = l2_norm(u, t1);

    const Eigen::VectorXd r = refined_residual(G, c, d); // moment defect, no ridge
    sol.residuals.resize(n);
    sol.residuals_unscaled.resize(n);
    for (int j = 0; j < n; ++j) {
        sol.residuals[j] = std::abs(r[j]);
        sol.residuals_unscaled[j] =
            r[j] == 0.0 ? 0.0
                        : std::exp(std::log(std::abs(r[j])) - targets.log_scale[j]);
    }
    return sol;
}

std::vector<double> residual_report(const ControlSolution& solution,
                                    const KernelFamily& family,
                                    const MomentTargets& targets)
{
    const int n = std::min<int>(family.size(), targets.size());
    std::vector<double> res(n);
    for (int j = 0; j < n; ++j)
        res[j] = inner_product(family.kernels[j], solution.control, family.t1) -
                 targets.values[j];
    return res;
}

} // namespace mcontrol

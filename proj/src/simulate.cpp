#include "mcontrol/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcontrol/errors.hpp"

namespace mcontrol {

StateCoordinates propagate(const CoupledModel& model, const EigenSystem& eig,
                           const SpectrumPartition& partition,
                           const Eigen::VectorXd& x0_y, const Eigen::VectorXd& x0_z,
                           const ExponentialSum& u, double t)
{
    if (x0_y.size() != model.ny() || x0_z.size() != model.nz())
        throw DimensionMismatch("propagate: initial state lengths must match the model");
    if (t < 0.0) throw ValidationError("propagate: t must be nonnegative");

    const auto& mu = model.spec_y.eigenvalues;
    const auto& nu = model.spec_z.eigenvalues;
    const bool forced = t > 0.0 && !u.empty();

    StateCoordinates st;
    st.t = t;
    st.y_coords = Eigen::VectorXd::Zero(model.ny());
    st.z_coords = Eigen::VectorXd::Zero(model.nz());

    // Z block is diagonal: z_k(t) = e^{nu_k t} z0_k + b_Zk * Duhamel.
    for (int k = 0; k < model.nz(); ++k) {
        double zk = std::exp(nu[k] * t) * x0_z[k];
        if (forced && model.b_z[k] != 0.0)
            zk += model.b_z[k] *
                  inner_product(ExponentialSum::single(1.0, -nu[k], 0, nu[k] * t), u, t);
        st.z_coords[k] = zk;
    }

    const BCoefficients bc = b_coefficients(model, eig);

    // Unmatched Y mode j:
    //   y_j(t) = e^{mu_j t} (x0, psi_j) - (S_Z(t) x_Z0, psi_Zj) + <K_j, u>_[0,t]
    for (std::size_t i = 0; i < partition.i_y.size(); ++i) {
        const int j = partition.i_y[i];
        const double lam = mu[j];
        const Eigen::VectorXd& psi = eig.psi_z_for_y[i];

        const double proj = x0_y[j] + x0_z.dot(psi);
        double sz = 0.0;
        for (int k = 0; k < model.nz(); ++k)
            sz += std::exp(nu[k] * t) * x0_z[k] * psi[k];
        double yj = std::exp(lam * t) * proj - sz;

        if (forced) {
            std::vector<ExpTerm> kt;
            kt.push_back({bc.b_y_modes[i], -lam, 0, lam * t});
            for (int k = 0; k < model.nz(); ++k) {
                const double c = -model.b_z[k] * psi[k];
                if (c != 0.0) kt.push_back({c, -nu[k], 0, nu[k] * t});
            }
            yj += inner_product(ExponentialSum(std::move(kt)), u, t);
        }
        st.y_coords[j] = yj;
    }

    // Matched pair m: the secular c_m t e^{lambda t} term rides on the
    // degree-1 extension of the exponential-sum algebra.
    for (std::size_t m = 0; m < partition.i_yz.size(); ++m) {
        const auto [jy, kz] = partition.i_yz[m];
        const PairSystem& p = eig.pairs[m];
        const double lam = p.lambda;

        const double a1 = x0_y[jy] + x0_z.dot(p.psi1_z);
        const double a2 = x0_z[kz];
        double sz = 0.0;
        for (int k = 0; k < model.nz(); ++k)
            sz += std::exp(nu[k] * t) * x0_z[k] * p.psi1_z[k];
        double yj = std::exp(lam * t) * (a1 + p.c_m * t * a2) - sz;

        if (forced) {
            const double b1 = bc.b1_pairs[m];
            const double b2 = bc.b2_pairs[m];
            std::vector<ExpTerm> kt;
            kt.push_back({b1 + b2 * p.c_m * t, -lam, 0, lam * t});
            if (b2 * p.c_m != 0.0) kt.push_back({-b2 * p.c_m, -lam, 1, lam * t});
            for (int k = 0; k < model.nz(); ++k) {
                const double c = -model.b_z[k] * p.psi1_z[k];
                if (c != 0.0) kt.push_back({c, -nu[k], 0, nu[k] * t});
            }
            yj += inner_product(ExponentialSum(std::move(kt)), u, t);
        }
        st.y_coords[jy] = yj;
    }

    st.y_norm_estimate = st.y_coords.norm();
    return st;
}

VerificationReport verify_partial_null(const CoupledModel& model, const EigenSystem& eig,
                                       const SpectrumPartition& partition,
                                       const Eigen::VectorXd& x0_y,
                                       const Eigen::VectorXd& x0_z,
                                       const ControlSolution& solution, double t1,
                                       int n_verify, double tolerance)
{
    const auto modes = moment_mode_order(model, partition);
    if (n_verify < solution.n_synth || n_verify > static_cast<int>(modes.size()))
        throw DimensionMismatch("verify_partial_null: need n_synth <= n_verify <= mode count");

    VerificationReport rep;
    rep.n_synth = solution.n_synth;
    rep.n_verify = n_verify;
    rep.tolerance = tolerance;
    rep.controlled = propagate(model, eig, partition, x0_y, x0_z, solution.control, t1);
    rep.uncontrolled = propagate(model, eig, partition, x0_y, x0_z, ExponentialSum(), t1);

    double max_ctrl = 0.0, unc_norm2 = 0.0;
    for (int i = 0; i < rep.n_synth; ++i) {
        const double c = rep.controlled.y_coords[modes[i].y_index];
        const double b = rep.uncontrolled.y_coords[modes[i].y_index];
        max_ctrl = std::max(max_ctrl, std::abs(c));
        unc_norm2 += b * b;
        if (b != 0.0)
            rep.ratios.push_back(std::abs(c) / std::abs(b));
        else
            rep.ratios.push_back(c == 0.0 ? 0.0
                                          : std::numeric_limits<double>::infinity());
    }
    rep.verdict = max_ctrl <= tolerance * std::max(1.0, std::sqrt(unc_norm2));

    for (int i = rep.n_synth; i < n_verify; ++i) {
        const double c = rep.controlled.y_coords[modes[i].y_index];
        const double b = rep.uncontrolled.y_coords[modes[i].y_index];
        rep.spillover = std::max(rep.spillover, std::abs(c));
        rep.uncontrolled_spillover = std::max(rep.uncontrolled_spillover, std::abs(b));
        rep.control_induced_spillover =
            std::max(rep.control_induced_spillover, std::abs(c - b));
    }
    return rep;
}

double semigroup_consistency_check(const CoupledModel& model, const EigenSystem& eig,
                                   const SpectrumPartition& partition,
                                   const Eigen::VectorXd& x0_y,
                                   const Eigen::VectorXd& x0_z, double s, double t)
{
    if (s < 0.0 || t < 0.0)
        throw ValidationError("semigroup_consistency_check: s, t must be nonnegative");
    const ExponentialSum no_control;
    const StateCoordinates direct =
        propagate(model, eig, partition, x0_y, x0_z, no_control, s + t);
    const StateCoordinates mid = propagate(model, eig, partition, x0_y, x0_z, no_control, s);
    const StateCoordinates chained =
        propagate(model, eig, partition, mid.y_coords, mid.z_coords, no_control, t);

    double scale = 0.0, dev = 0.0;
    for (int j = 0; j < model.ny(); ++j) {
        dev = std::max(dev, std::abs(direct.y_coords[j] - chained.y_coords[j]));
        scale = std::max(scale, std::abs(direct.y_coords[j]));
    }
    for (int k = 0; k < model.nz(); ++k) {
        dev = std::max(dev, std::abs(direct.z_coords[k] - chained.z_coords[k]));
        scale = std::max(scale, std::abs(direct.z_coords[k]));
    }
    return dev / std::max(scale, 1e-300);
}

} // namespace mcontrol

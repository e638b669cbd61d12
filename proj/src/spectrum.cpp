#include "mcontrol/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcontrol/errors.hpp"

namespace mcontrol {

namespace {

std::vector<std::string> default_labels(const char* prefix, int n)
{
    std::vector<std::string> out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

void check_branch(const BranchSpectrum& s, const char* name, double duplicate_tol)
{
    for (double lam : s.eigenvalues)
        if (!std::isfinite(lam))
            throw ValidationError(std::string(name) + ": non-finite eigenvalue");
    std::vector<double> sorted = s.eigenvalues;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i] - sorted[i - 1] <= duplicate_tol) {
            std::ostringstream msg;
            msg << name << ": eigenvalues " << sorted[i - 1] << " and " << sorted[i]
                << " are not separated beyond duplicate tolerance " << duplicate_tol;
            throw DuplicateEigenvalueWithinBranch(msg.str());
        }
    }
}

} // namespace

double CoupledModel::eigen_scale() const
{
    double scale = 0.0;
    for (double lam : spec_y.eigenvalues) scale = std::max(scale, std::abs(lam));
    for (double lam : spec_z.eigenvalues) scale = std::max(scale, std::abs(lam));
    return scale;
}

CoupledModel build_coupled_model(BranchSpectrum spec_y, BranchSpectrum spec_z,
                                 Eigen::MatrixXd coupling, Eigen::VectorXd b_y,
                                 Eigen::VectorXd b_z, double t1)
{
    const int ny = static_cast<int>(spec_y.eigenvalues.size());
    const int nz = static_cast<int>(spec_z.eigenvalues.size());
    if (ny == 0 || nz == 0)
        throw ValidationError("build_coupled_model: both branches need at least one mode");
    if (coupling.rows() != ny || coupling.cols() != nz)
        throw DimensionMismatch("build_coupled_model: coupling must be ny x nz");
    if (b_y.size() != ny || b_z.size() != nz)
        throw DimensionMismatch("build_coupled_model: control vector lengths must match branches");
    if (!(t1 > 0.0))
        throw NonPositiveHorizon("build_coupled_model: t1 must be positive");
    if (spec_y.labels.empty()) spec_y.labels = default_labels("y", ny);
    if (spec_z.labels.empty()) spec_z.labels = default_labels("z", nz);
    if (static_cast<int>(spec_y.labels.size()) != ny ||
        static_cast<int>(spec_z.labels.size()) != nz)
        throw DimensionMismatch("build_coupled_model: label lists must match eigenvalue lists");

    CoupledModel model{std::move(spec_y), std::move(spec_z), std::move(coupling),
                       std::move(b_y),   std::move(b_z),    t1};
    const double dup_tol = duplicate_tol_factor * model.eigen_scale();
    check_branch(model.spec_y, "spec_y", dup_tol);
    check_branch(model.spec_z, "spec_z", dup_tol);
    return model;
}

SpectrumPartition classify_spectra(const CoupledModel& model, double overlap_tol)
{
    if (overlap_tol < 0.0) overlap_tol = overlap_tol_factor * model.eigen_scale();

    const int ny = model.ny();
    const int nz = model.nz();
    std::vector<int> partner_of_y(ny, -1), partner_of_z(nz, -1);

    for (int j = 0; j < ny; ++j) {
        for (int k = 0; k < nz; ++k) {
            if (std::abs(model.spec_y.eigenvalues[j] - model.spec_z.eigenvalues[k]) >
                overlap_tol)
                continue;
            if (partner_of_y[j] >= 0) {
                std::ostringstream msg;
                msg << "classify_spectra: Y eigenvalue " << model.spec_y.eigenvalues[j]
                    << " overlaps two Z eigenvalues within tolerance " << overlap_tol;
                throw AmbiguousOverlap(msg.str());
            }
            if (partner_of_z[k] >= 0) {
                std::ostringstream msg;
                msg << "classify_spectra: Z eigenvalue " << model.spec_z.eigenvalues[k]
                    << " overlaps two Y eigenvalues within tolerance " << overlap_tol;
                throw AmbiguousOverlap(msg.str());
            }
            partner_of_y[j] = k;
            partner_of_z[k] = j;
        }
    }

    SpectrumPartition part;
    part.overlap_tol = overlap_tol;
    for (int j = 0; j < ny; ++j) {
        if (partner_of_y[j] >= 0)
            part.i_yz.emplace_back(j, partner_of_y[j]);
        else
            part.i_y.push_back(j);
    }
    for (int k = 0; k < nz; ++k)
        if (partner_of_z[k] < 0) part.i_z.push_back(k);
    return part;
}

namespace {

void guard_resonance(double gap, double guard, double mu, double nu)
{
    if (std::abs(gap) < guard) {
        std::ostringstream msg;
        msg << "near-resonant eigenvalue pair (" << mu << ", " << nu
            << "): gap " << std::abs(gap) << " below guard " << guard
            << "; merge the pair into the overlap set or lower the guard";
        throw NearResonance(msg.str());
    }
}

EigenSystem build_eigensystem(const CoupledModel& model, const SpectrumPartition& part,
                              double guard)
{
    if (guard < 0.0) guard = resonance_guard_factor * model.eigen_scale();
    const auto& mu = model.spec_y.eigenvalues;
    const auto& nu = model.spec_z.eigenvalues;
    const auto& C = model.coupling;

    EigenSystem eig;
    eig.partition = part;
    eig.ny = model.ny();
    eig.nz = model.nz();

    // Unmatched Y mode j: adjoint eigenvector psi_j = (e_j, psi_Zj) with
    // psi_Zj[k] = C(j,k) / (mu_j - nu_k).
    for (int j : part.i_y) {
        Eigen::VectorXd psi = Eigen::VectorXd::Zero(model.nz());
        for (int k = 0; k < model.nz(); ++k) {
            const double gap = mu[j] - nu[k];
            guard_resonance(gap, guard, mu[j], nu[k]);
            psi[k] = C(j, k) / gap;
        }
        eig.psi_z_for_y.push_back(std::move(psi));
    }

    // Unmatched Z mode k: eigenvector phi_k = (phi_Yk, e_k) with
    // phi_Yk[j] = C(j,k) / (nu_k - mu_j).
    for (int k : part.i_z) {
        Eigen::VectorXd phi = Eigen::VectorXd::Zero(model.ny());
        for (int j = 0; j < model.ny(); ++j) {
            const double gap = nu[k] - mu[j];
            guard_resonance(gap, guard, mu[j], nu[k]);
            phi[j] = C(j, k) / gap;
        }
        eig.phi_y_for_z.push_back(std::move(phi));
    }

    // Matched pair (jy, kz): length-2 chain at lambda = mu_jy. The free
    // components reproduce the (-1, +1) normalization: (phi_2m, psi_1m) = 0
    // and (phi_2m, psi_2m) = 1 hold exactly.
    for (auto [jy, kz] : part.i_yz) {
        PairSystem p;
        p.lambda = mu[jy];
        p.c_m = C(jy, kz);
        p.second_eigenvector = (p.c_m == 0.0);

        p.phi2_y = Eigen::VectorXd::Zero(model.ny());
        for (int j = 0; j < model.ny(); ++j) {
            if (j == jy) continue;
            const double gap = p.lambda - mu[j];
            guard_resonance(gap, guard, mu[j], p.lambda);
            p.phi2_y[j] = C(j, kz) / gap;
        }
        p.phi2_y[jy] = -1.0;

        p.psi1_z = Eigen::VectorXd::Zero(model.nz());
        for (int k = 0; k < model.nz(); ++k) {
            if (k == kz) continue;
            const double gap = p.lambda - nu[k];
            guard_resonance(gap, guard, p.lambda, nu[k]);
            p.psi1_z[k] = C(jy, k) / gap;
        }
        p.psi1_z[kz] = 1.0;

        eig.pairs.push_back(std::move(p));
    }

    eig.biorth_error = biorthogonality_check(eig);
    return eig;
}

} // namespace

EigenSystem eigenstructure_disjoint(const CoupledModel& model,
                                    const SpectrumPartition& partition,
                                    double resonance_guard)
{
    if (!partition.i_yz.empty())
        throw ValidationError("eigenstructure_disjoint: partition contains matched pairs; "
                              "use eigenstructure_overlap");
    return build_eigensystem(model, partition, resonance_guard);
}

EigenSystem eigenstructure_overlap(const CoupledModel& model,
                                   const SpectrumPartition& partition,
                                   double resonance_guard)
{
    return build_eigensystem(model, partition, resonance_guard);
}

BCoefficients b_coefficients(const CoupledModel& model, const EigenSystem& eig)
{
    if (model.ny() != eig.ny || model.nz() != eig.nz)
        throw DimensionMismatch("b_coefficients: model does not match eigensystem");
    BCoefficients out;
    for (std::size_t i = 0; i < eig.partition.i_y.size(); ++i) {
        const int j = eig.partition.i_y[i];
        out.b_y_modes.push_back(model.b_y[j] + model.b_z.dot(eig.psi_z_for_y[i]));
    }
    for (int k : eig.partition.i_z) out.b_z_modes.push_back(model.b_z[k]);
    for (std::size_t m = 0; m < eig.partition.i_yz.size(); ++m) {
        const auto [jy, kz] = eig.partition.i_yz[m];
        out.b1_pairs.push_back(model.b_y[jy] + model.b_z.dot(eig.pairs[m].psi1_z));
        out.b2_pairs.push_back(model.b_z[kz]);
    }
    return out;
}

double biorthogonality_check(const EigenSystem& eig)
{
    const int dim = eig.ny + eig.nz;
    const int count = static_cast<int>(eig.partition.i_y.size() + eig.partition.i_z.size() +
                                       2 * eig.partition.i_yz.size());
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(count, dim);
    Eigen::MatrixXd Psi = Eigen::MatrixXd::Zero(count, dim);

    int row = 0;
    for (std::size_t i = 0; i < eig.partition.i_y.size(); ++i, ++row) {
        const int j = eig.partition.i_y[i];
        Phi(row, j) = 1.0;
        Psi(row, j) = 1.0;
        Psi.row(row).segment(eig.ny, eig.nz) = eig.psi_z_for_y[i].transpose();
    }
    for (std::size_t i = 0; i < eig.partition.i_z.size(); ++i, ++row) {
        const int k = eig.partition.i_z[i];
        Phi.row(row).segment(0, eig.ny) = eig.phi_y_for_z[i].transpose();
        Phi(row, eig.ny + k) = 1.0;
        Psi(row, eig.ny + k) = 1.0;
    }
    for (std::size_t m = 0; m < eig.partition.i_yz.size(); ++m) {
        const auto [jy, kz] = eig.partition.i_yz[m];
        // phi_1m with psi_1m
        Phi(row, jy) = 1.0;
        Psi(row, jy) = 1.0;
        Psi.row(row).segment(eig.ny, eig.nz) = eig.pairs[m].psi1_z.transpose();
        ++row;
        // phi_2m with psi_2m
        Phi.row(row).segment(0, eig.ny) = eig.pairs[m].phi2_y.transpose();
        Phi(row, eig.ny + kz) = 1.0;
        Psi(row, eig.ny + kz) = 1.0;
        ++row;
    }

    const Eigen::MatrixXd D = Phi * Psi.transpose() - Eigen::MatrixXd::Identity(count, count);
    return D.cwiseAbs().maxCoeff();
}

std::vector<MomentMode> moment_mode_order(const CoupledModel& model,
                                          const SpectrumPartition& partition)
{
    std::vector<MomentMode> modes;
    for (std::size_t i = 0; i < partition.i_y.size(); ++i) {
        const int j = partition.i_y[i];
        modes.push_back({model.spec_y.eigenvalues[j], j, static_cast<int>(i), -1,
                         model.spec_y.labels[j]});
    }
    for (std::size_t m = 0; m < partition.i_yz.size(); ++m) {
        const int jy = partition.i_yz[m].first;
        modes.push_back({model.spec_y.eigenvalues[jy], jy, -1, static_cast<int>(m),
                         model.spec_y.labels[jy] + "*"});
    }
    std::stable_sort(modes.begin(), modes.end(),
                     [](const MomentMode& a, const MomentMode& b) { return a.lambda > b.lambda; });
    return modes;
}

} // namespace mcontrol

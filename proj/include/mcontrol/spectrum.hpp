#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mcontrol {

// Default tolerance factors, all relative to the largest eigenvalue modulus
// of the model. "Same eigenvalue" (overlap machinery) and "dangerously
// close" (ill-conditioned resolvent) are kept apart on purpose.
inline constexpr double duplicate_tol_factor = 1e-12;
inline constexpr double overlap_tol_factor = 1e-9;
inline constexpr double resonance_guard_factor = 1e-6;

/// Eigenvalues of one diagonalized branch, with mode labels.
struct BranchSpectrum {
    std::vector<double> eigenvalues;
    std::vector<std::string> labels;
};

/// Truncated coordinate model of the one-way coupled system
///   y' = A_Y y + A_YZ z + b_Y u,   z' = A_Z z + b_Z u
/// expressed on orthonormal reference bases that diagonalize A_Y and A_Z.
/// coupling(j, k) is the coordinate of A_YZ applied to the k-th Z mode
/// against the j-th Y mode.
struct CoupledModel {
    BranchSpectrum spec_y;
    BranchSpectrum spec_z;
    Eigen::MatrixXd coupling; // ny x nz
    Eigen::VectorXd b_y;      // ny
    Eigen::VectorXd b_z;      // nz
    double t1 = 0.0;

    int ny() const { return static_cast<int>(spec_y.eigenvalues.size()); }
    int nz() const { return static_cast<int>(spec_z.eigenvalues.size()); }
    double eigen_scale() const; // max |lambda| over both branches
};

CoupledModel build_coupled_model(BranchSpectrum spec_y, BranchSpectrum spec_z,
                                 Eigen::MatrixXd coupling, Eigen::VectorXd b_y,
                                 Eigen::VectorXd b_z, double t1);

/// Assignment of every mode to exactly one of: unmatched Y, unmatched Z, or
/// a matched (y, z) eigenvalue pair within overlap_tol.
struct SpectrumPartition {
    std::vector<int> i_y;
    std::vector<int> i_z;
    std::vector<std::pair<int, int>> i_yz; // (y index, z index)
    double overlap_tol = 0.0;
};

/// Greedy nearest-eigenvalue matching; throws AmbiguousOverlap when one
/// eigenvalue has two distinct partners within tolerance.
/// overlap_tol < 0 selects the default overlap_tol_factor * eigen_scale().
SpectrumPartition classify_spectra(const CoupledModel& model, double overlap_tol = -1.0);

/// Jordan-pair data for one matched eigenvalue (length-2 chain at most).
struct PairSystem {
    double lambda = 0.0;
    double c_m = 0.0;              // coupling scalar; 0 means a genuine second eigenvector
    Eigen::VectorXd phi2_y;        // generalized eigenvector, Y part
    Eigen::VectorXd psi1_z;        // adjoint generalized eigenvector, Z part
    bool second_eigenvector = false; // multiplicity-2 eigenvalue, no Jordan block
};

/// Coordinates of the eigenvectors of A and A*. The reference-basis parts
/// are unit coordinate vectors by construction and are not stored.
struct EigenSystem {
    SpectrumPartition partition;
    int ny = 0;
    int nz = 0;
    std::vector<Eigen::VectorXd> psi_z_for_y; // adjoint Z parts, per partition.i_y entry
    std::vector<Eigen::VectorXd> phi_y_for_z; // eigenvector Y parts, per partition.i_z entry
    std::vector<PairSystem> pairs;            // per partition.i_yz entry
    double biorth_error = 0.0;
};

/// Disjoint-spectra eigenstructure; requires partition.i_yz empty.
/// guard < 0 selects resonance_guard_factor * eigen_scale().
EigenSystem eigenstructure_disjoint(const CoupledModel& model,
                                    const SpectrumPartition& partition,
                                    double resonance_guard = -1.0);

/// Eigenstructure allowing matched pairs (generalized eigenvectors with
/// coupling scalars c_m); unmatched modes are handled as in the disjoint case.
EigenSystem eigenstructure_overlap(const CoupledModel& model,
                                   const SpectrumPartition& partition,
                                   double resonance_guard = -1.0);

/// Control coordinates against the adjoint (generalized) eigenvectors.
struct BCoefficients {
    std::vector<double> b_y_modes; // (b, psi_j), per partition.i_y entry
    std::vector<double> b_z_modes; // (b, psi_k) = (b_Z, psi_Zk), per partition.i_z entry
    std::vector<double> b1_pairs;  // (b, psi_1j)
    std::vector<double> b2_pairs;  // (b, psi_2j)
};

BCoefficients b_coefficients(const CoupledModel& model, const EigenSystem& eig);

/// Max |(phi_i, psi_j) - delta_ij| over all constructed basis pairs.
double biorthogonality_check(const EigenSystem& eig);

/// One moment equation owner: either an unmatched Y mode or a matched pair.
struct MomentMode {
    double lambda = 0.0;
    int y_index = -1;     // Y reference coordinate this mode controls
    int iy_pos = -1;      // position in partition.i_y, or -1
    int pair_index = -1;  // position in partition.i_yz, or -1
    std::string id;
};

/// The moment-family enumeration: unmatched Y modes and matched pairs,
/// ordered by decreasing eigenvalue.
std::vector<MomentMode> moment_mode_order(const CoupledModel& model,
                                          const SpectrumPartition& partition);

} // namespace mcontrol

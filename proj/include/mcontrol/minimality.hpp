#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcontrol/expsum.hpp"
#include "mcontrol/spectrum.hpp"

namespace mcontrol {

inline constexpr double stability_floor_factor = 1e-10;
inline constexpr double divergence_ceiling = 1e12;
inline constexpr double series_tail_tol = 1e-12;

/// Moment kernels g_j, one per moment mode, in moment_mode_order.
/// When scaled, kernel j carries the diagonal rescaling e^{lambda_j t1}
/// folded into its term log-weights, so families with rates up to +N^2
/// stay representable; log_scale records the folded exponents.
struct KernelFamily {
    std::vector<ExponentialSum> kernels;
    std::vector<MomentMode> modes;
    std::vector<std::string> mode_ids;
    bool scaled = true;
    std::vector<double> log_scale; // lambda_j * t1 when scaled, else 0
    double t1 = 0.0;

    int size() const { return static_cast<int>(kernels.size()); }
};

KernelFamily kernel_family(const CoupledModel& model, const EigenSystem& eig,
                           const SpectrumPartition& partition, bool scaled = true);

/// n x n cutout of the family's Gram matrix, exact closed-form entries.
/// threads = 0 uses hardware concurrency; entries are assembled into fixed
/// slots, so the result is identical for any thread count.
Eigen::MatrixXd gram_matrix(const KernelFamily& family, double t1, int n,
                            int threads = 1);

enum class MinimalityVerdict { StronglyMinimalEvidence, DegeneratingEvidence, Inconclusive };

const char* to_string(MinimalityVerdict v);

/// Smallest/largest eigenvalue sequences of the Gram cutouts plus the
/// norm-scaling decomposition G = D Ghat D, D = diag(||g_j||).
struct GramAnalysis {
    int n_max = 0;
    std::vector<double> lambda1_seq;
    std::vector<double> lambdan_seq;
    std::vector<double> norms;
    std::vector<double> lambda1_normalized_seq;
    MinimalityVerdict verdict = MinimalityVerdict::Inconclusive;
    double lower_bound = 0.0; // min_j ||g_j||^2 * lambda1(Ghat_{n_max})
};

/// Evidence-level strong-minimality diagnostic. A finite truncation can
/// only certify trends, never the limit itself: the verdict reports what
/// the cutout sequence shows at n_max.
GramAnalysis strong_minimality_diagnostic(const KernelFamily& family, double t1,
                                          int n_max, int threads = 1);

struct EpsilonFit {
    double epsilon = 0.0;
    double k_epsilon = 0.0; // fitted max_j ||q_j|| e^{lambda_j eps}
    bool satisfied = false; // bound trend stays finite across the truncation
};

/// Norms of the biorthogonal family within the truncated span:
/// ||q_j||^2 = (G_n^{-1})_jj, plus the exponential-bound fit per epsilon.
struct BiorthFit {
    std::vector<double> q_norms;
    std::vector<EpsilonFit> fits;
};

BiorthFit biorthogonal_norms(const KernelFamily& family, double t1, int n,
                             const std::vector<double>& epsilon_grid);

/// Tail sequence 2 ln|b_j| / lambda_j and its extrapolated limit
/// (mean of the last quartile). Modes with b_j = 0 are controllability
/// obstructions and are reported rather than silently dropped; modes with
/// lambda_j >= 0 fall outside the Dirichlet-series argument and are skipped.
struct DirichletAbscissa {
    std::vector<double> sequence;
    double limit = 0.0;
    std::vector<int> zero_modes;
    std::vector<int> skipped_modes;
};

DirichletAbscissa dirichlet_abscissa(const std::vector<double>& b_vals,
                                     const std::vector<double>& lambdas);

/// Gap/reciprocal-sum sufficient-condition certificate at a truncation.
/// Nonnegative eigenvalues are excluded and flagged; the checks run on the
/// remaining strictly decreasing negative subsequence.
struct GapCertificate {
    double rho = 0.0;
    bool min_modulus_ok = false;
    bool pairwise_gap_ok = false;
    double reciprocal_sum = 0.0;
    double tail_exponent = 0.0; // fitted p in |lambda_n| ~ c n^p
    double tail_bound = 0.0;    // bound on the neglected reciprocal tail; inf if p <= 1
    bool reciprocal_sum_finite = false;
    bool all_ok = false;
    std::vector<int> excluded_nonnegative;
};

GapCertificate gap_certificate(const std::vector<double>& lambdas, double rho);

enum class SeriesVerdict { Convergent, Divergent, Inconclusive };

const char* to_string(SeriesVerdict v);

struct SeriesDiagnostic {
    std::vector<double> partial_sums;
    SeriesVerdict verdict = SeriesVerdict::Inconclusive;
};

/// Partial sums of sum_j e^{-2 lambda_j t1} |(S_Z(t1) x_Z0, psi_Zj)|^2 over
/// the moment modes, with all magnitudes combined in log space so that the
/// e^{+2n^2 t1} prefactors cancel exactly against decaying coordinates.
SeriesDiagnostic series_convergence_diagnostic(const CoupledModel& model,
                                               const EigenSystem& eig,
                                               const Eigen::VectorXd& x_z0, double t1,
                                               int n_terms);

} // namespace mcontrol

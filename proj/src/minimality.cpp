#include "mcontrol/minimality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Eigenvalues>

#include "mcontrol/errors.hpp"

namespace mcontrol {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct LineFit {
    double slope = 0.0;
    double r2 = 0.0;
    bool ok = false;
};

LineFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys)
{
    LineFit fit;
    const std::size_t n = xs.size();
    if (n < 2 || ys.size() != n) return fit;
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    fit.ok = true;
    return fit;
}

Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw EigensolverFailure("symmetric eigensolver did not converge");
    return es.eigenvalues();
}

// Smallest eigenvalue, cross-checked by inverse-power iteration when it
// sits deep below the spectral radius.
double smallest_eig_crosschecked(const Eigen::MatrixXd& m, double lambda_max)
{
    const double lam1 = sym_eigenvalues(m)(0);
    if (!(lam1 > 0.0) || lam1 >= 1e-8 * std::abs(lambda_max)) return lam1;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success) return lam1;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
    for (int it = 0; it < 4; ++it) {
        v = ldlt.solve(v);
        const double nrm = v.norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) return lam1;
        v /= nrm;
    }
    const double rq = v.dot(m * v);
    if (std::isfinite(rq) && rq > 0.0 && std::abs(rq - lam1) <= 0.5 * std::max(rq, lam1))
        return rq;
    return lam1;
}

} // namespace

const char* to_string(MinimalityVerdict v)
{
    switch (v) {
    case MinimalityVerdict::StronglyMinimalEvidence: return "strongly_minimal_evidence";
    case MinimalityVerdict::DegeneratingEvidence: return "degenerating_evidence";
    default: return "inconclusive";
    }
}

const char* to_string(SeriesVerdict v)
{
    switch (v) {
    case SeriesVerdict::Convergent: return "convergent";
    case SeriesVerdict::Divergent: return "divergent";
    default: return "inconclusive";
    }
}

KernelFamily kernel_family(const CoupledModel& model, const EigenSystem& eig,
                           const SpectrumPartition& partition, bool scaled)
{
    const BCoefficients bc = b_coefficients(model, eig);
    const auto& nu = model.spec_z.eigenvalues;
    const double t1 = model.t1;

    KernelFamily fam;
    fam.scaled = scaled;
    fam.t1 = t1;
    fam.modes = moment_mode_order(model, partition);

    for (const MomentMode& mode : fam.modes) {
        const double lam = mode.lambda;
        const double w0 = scaled ? lam * t1 : 0.0; // weight of the e^{-lambda tau} part
        std::vector<ExpTerm> terms;

        if (mode.pair_index < 0) {
            // g_j(tau) = b_j e^{-lambda tau}
            //          - e^{-lambda t1} (S_Z(t1 - tau) b_Z, psi_Zj)
            const double bj = bc.b_y_modes[mode.iy_pos];
            terms.push_back({bj, -lam, 0, w0});
            const Eigen::VectorXd& psi = eig.psi_z_for_y[mode.iy_pos];
            for (int k = 0; k < model.nz(); ++k) {
                const double c = -model.b_z[k] * psi[k];
                if (c == 0.0) continue;
                terms.push_back({c, -nu[k], 0, w0 + (nu[k] - lam) * t1});
            }
        } else {
            // [b_1j + b_2j c_j (t1 - tau)] e^{-lambda tau}
            //   - e^{-lambda t1} (S_Z(t1 - tau) b_Z, psi_1Zj)
            const PairSystem& p = eig.pairs[mode.pair_index];
            const double b1 = bc.b1_pairs[mode.pair_index];
            const double b2 = bc.b2_pairs[mode.pair_index];
            terms.push_back({b1 + b2 * p.c_m * t1, -lam, 0, w0});
            if (b2 * p.c_m != 0.0) terms.push_back({-b2 * p.c_m, -lam, 1, w0});
            for (int k = 0; k < model.nz(); ++k) {
                const double c = -model.b_z[k] * p.psi1_z[k];
                if (c == 0.0) continue;
                terms.push_back({c, -nu[k], 0, w0 + (nu[k] - lam) * t1});
            }
        }

        fam.kernels.emplace_back(std::move(terms));
        fam.mode_ids.push_back(mode.id);
        fam.log_scale.push_back(scaled ? lam * t1 : 0.0);
    }
    return fam;
}

Eigen::MatrixXd gram_matrix(const KernelFamily& family, double t1, int n, int threads)
{
    if (n < 0 || n > family.size())
        throw DimensionMismatch("gram_matrix: cutout size exceeds family size");
    Eigen::MatrixXd G(n, n);
    std::vector<std::pair<int, int>> jobs;
    jobs.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) jobs.emplace_back(i, j);

    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto [i, j] = jobs[idx];
            G(i, j) = inner_product(family.kernels[i], family.kernels[j], t1);
        }
    };

    if (threads == 0)
        threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min<std::size_t>(threads, std::max<std::size_t>(jobs.size(), 1));

    if (threads <= 1 || jobs.size() < 64) {
        run(0, jobs.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (jobs.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(jobs.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) G(j, i) = G(i, j);
    return G;
}

GramAnalysis strong_minimality_diagnostic(const KernelFamily& family, double t1,
                                          int n_max, int threads)
{
    if (n_max < 1 || n_max > family.size())
        throw DimensionMismatch("strong_minimality_diagnostic: invalid n_max");

    const Eigen::MatrixXd G = gram_matrix(family, t1, n_max, threads);

    GramAnalysis ga;
    ga.n_max = n_max;
    ga.norms.resize(n_max);
    for (int j = 0; j < n_max; ++j) ga.norms[j] = std::sqrt(std::max(0.0, G(j, j)));

    Eigen::MatrixXd Ghat(n_max, n_max);
    for (int i = 0; i < n_max; ++i)
        for (int j = 0; j < n_max; ++j)
            Ghat(i, j) = G(i, j) / (std::max(ga.norms[i], 1e-300) *
                                    std::max(ga.norms[j], 1e-300));

    std::vector<double> lambdan_normalized(n_max);
    for (int n = 1; n <= n_max; ++n) {
        const Eigen::VectorXd ev = sym_eigenvalues(G.topLeftCorner(n, n));
        const Eigen::VectorXd evh = sym_eigenvalues(Ghat.topLeftCorner(n, n));
        ga.lambda1_seq.push_back(n == 1 ? ev(0)
                                        : smallest_eig_crosschecked(G.topLeftCorner(n, n),
                                                                    ev(n - 1)));
        ga.lambdan_seq.push_back(ev(n - 1));
        ga.lambda1_normalized_seq.push_back(
            n == 1 ? evh(0)
                   : smallest_eig_crosschecked(Ghat.topLeftCorner(n, n), evh(n - 1)));
        lambdan_normalized[n - 1] = evh(n - 1);
    }

    double min_norm2 = kInf;
    for (int j = 0; j < n_max; ++j) min_norm2 = std::min(min_norm2, ga.norms[j] * ga.norms[j]);
    ga.lower_bound = min_norm2 * std::max(0.0, ga.lambda1_normalized_seq.back());

    // Verdict. The floor criterion comes first: while lambda1 still sits
    // above stability_floor nothing observable has degenerated at this
    // truncation. Only families that fell below the floor are examined for
    // geometric decay of the normalized sequence.
    const double lamn = ga.lambdan_seq.back();
    const double floor_val = stability_floor_factor * lamn;
    if (lamn <= 0.0) {
        ga.verdict = MinimalityVerdict::DegeneratingEvidence;
        return ga;
    }
    if (ga.lambda1_seq.back() >= floor_val) {
        ga.verdict = MinimalityVerdict::StronglyMinimalEvidence;
        return ga;
    }

    const double annihilated = 1e3 * kEps * lambdan_normalized[n_max - 1];
    if (ga.lambda1_normalized_seq.back() <= annihilated) {
        ga.verdict = MinimalityVerdict::DegeneratingEvidence;
        return ga;
    }
    // log-linear fit over the last five trustworthy points
    std::vector<double> xs, ys;
    for (int n = 1; n <= n_max; ++n) {
        const double v = ga.lambda1_normalized_seq[n - 1];
        if (v > 1e3 * kEps * lambdan_normalized[n - 1]) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::log(v));
        }
    }
    if (xs.size() > 5) {
        xs.erase(xs.begin(), xs.end() - 5);
        ys.erase(ys.begin(), ys.end() - 5);
    }
    const LineFit fit = linear_fit(xs, ys);
    if (fit.ok && xs.size() >= 3 && fit.slope <= -0.5 && fit.r2 >= 0.99)
        ga.verdict = MinimalityVerdict::DegeneratingEvidence;
    else
        ga.verdict = MinimalityVerdict::Inconclusive;
    return ga;
}

BiorthFit biorthogonal_norms(const KernelFamily& family, double t1, int n,
                             const std::vector<double>& epsilon_grid)
{
    if (n < 1 || n > family.size())
        throw DimensionMismatch("biorthogonal_norms: invalid n");
    const Eigen::MatrixXd G = gram_matrix(family, t1, n, 1);

    Eigen::VectorXd norms(n);
    for (int j = 0; j < n; ++j) norms[j] = std::sqrt(std::max(0.0, G(j, j)));
    Eigen::MatrixXd Ghat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            Ghat(i, j) = G(i, j) / (std::max(norms[i], 1e-300) * std::max(norms[j], 1e-300));

    const Eigen::VectorXd evh = sym_eigenvalues(Ghat);
    if (!(evh(0) > n * kEps * evh(n - 1)))
        throw SingularGram("biorthogonal_norms: family numerically dependent at this truncation");

    const Eigen::MatrixXd Hinv =
        Ghat.ldlt().solve(Eigen::MatrixXd::Identity(n, n));

    BiorthFit fit;
    fit.q_norms.resize(n);
    for (int j = 0; j < n; ++j)
        fit.q_norms[j] = std::sqrt(std::max(0.0, Hinv(j, j))) / std::max(norms[j], 1e-300);

    for (double eps : epsilon_grid) {
        EpsilonFit ef;
        ef.epsilon = eps;
        std::vector<double> xs, ys;
        double kmax = 0.0;
        for (int j = 0; j < n; ++j) {
            const double lnv = std::log(std::max(fit.q_norms[j], 1e-300)) +
                               family.modes[j].lambda * eps;
            kmax = std::max(kmax, std::exp(lnv));
            xs.push_back(static_cast<double>(j));
            ys.push_back(lnv);
        }
        ef.k_epsilon = kmax;
        if (n == 1) {
            ef.satisfied = true;
        } else {
            const std::size_t half = (xs.size() + 1) / 2;
            std::vector<double> xt(xs.end() - half, xs.end());
            std::vector<double> yt(ys.end() - half, ys.end());
            const LineFit lf = linear_fit(xt, yt);
            ef.satisfied = lf.ok && lf.slope <= 0.05;
        }
        fit.fits.push_back(ef);
    }
    return fit;
}

DirichletAbscissa dirichlet_abscissa(const std::vector<double>& b_vals,
                                     const std::vector<double>& lambdas)
{
    if (b_vals.size() != lambdas.size())
        throw DimensionMismatch("dirichlet_abscissa: input lengths differ");
    DirichletAbscissa out;
    for (std::size_t j = 0; j < b_vals.size(); ++j) {
        if (b_vals[j] == 0.0) {
            out.zero_modes.push_back(static_cast<int>(j));
            continue;
        }
        if (lambdas[j] >= 0.0) {
            out.skipped_modes.push_back(static_cast<int>(j));
            continue;
        }
        out.sequence.push_back(2.0 * std::log(std::abs(b_vals[j])) / lambdas[j]);
    }
    if (out.sequence.empty())
        throw ZeroCoefficient("dirichlet_abscissa: no usable modes (zero coefficients or "
                              "nonnegative eigenvalues only)");
    const std::size_t q = (out.sequence.size() + 3) / 4;
    double acc = 0.0;
    for (std::size_t i = out.sequence.size() - q; i < out.sequence.size(); ++i)
        acc += out.sequence[i];
    out.limit = acc / static_cast<double>(q);
    return out;
}

GapCertificate gap_certificate(const std::vector<double>& lambdas, double rho)
{
    if (!(rho > 0.0)) throw ValidationError("gap_certificate: rho must be positive");

    GapCertificate cert;
    cert.rho = rho;
    std::vector<double> lam;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (lambdas[i] >= 0.0)
            cert.excluded_nonnegative.push_back(static_cast<int>(i));
        else
            lam.push_back(lambdas[i]);
    }
    if (lam.empty()) throw ValidationError("gap_certificate: no negative eigenvalues");
    for (std::size_t i = 1; i < lam.size(); ++i)
        if (!(lam[i] < lam[i - 1]))
            throw ValidationError("gap_certificate: eigenvalues must be strictly decreasing");

    cert.min_modulus_ok = std::abs(lam[0]) >= rho;
    cert.pairwise_gap_ok = true;
    for (std::size_t m = 0; m < lam.size() && cert.pairwise_gap_ok; ++m)
        for (std::size_t n = m + 1; n < lam.size(); ++n)
            if (!(std::abs(lam[m] - lam[n]) > static_cast<double>(n - m) * rho)) {
                cert.pairwise_gap_ok = false;
                break;
            }

    cert.reciprocal_sum = 0.0;
    for (double l : lam) cert.reciprocal_sum += 1.0 / std::abs(l);

    cert.tail_exponent = std::numeric_limits<double>::quiet_NaN();
    cert.tail_bound = kInf;
    cert.reciprocal_sum_finite = false;
    if (lam.size() >= 4) {
        const std::size_t start = lam.size() / 2;
        std::vector<double> xs, ys;
        for (std::size_t i = start; i < lam.size(); ++i) {
            xs.push_back(std::log(static_cast<double>(i + 1)));
            ys.push_back(std::log(std::abs(lam[i])));
        }
        const LineFit fit = linear_fit(xs, ys);
        if (fit.ok) {
            cert.tail_exponent = fit.slope;
            if (fit.slope > 1.05) {
                cert.reciprocal_sum_finite = true;
                double c = kInf;
                for (std::size_t i = start; i < lam.size(); ++i)
                    c = std::min(c, std::abs(lam[i]) /
                                        std::pow(static_cast<double>(i + 1), fit.slope));
                const double N = static_cast<double>(lam.size());
                cert.tail_bound = std::pow(N, 1.0 - fit.slope) / (c * (fit.slope - 1.0));
            }
        }
    }
    cert.all_ok = cert.min_modulus_ok && cert.pairwise_gap_ok && cert.reciprocal_sum_finite;
    return cert;
}

SeriesDiagnostic series_convergence_diagnostic(const CoupledModel& model,
                                               const EigenSystem& eig,
                                               const Eigen::VectorXd& x_z0, double t1,
                                               int n_terms)
{
    if (x_z0.size() != model.nz())
        throw DimensionMismatch("series_convergence_diagnostic: x_z0 length");
    const auto modes = moment_mode_order(model, eig.partition);
    n_terms = std::min<int>(n_terms, static_cast<int>(modes.size()));
    const auto& nu = model.spec_z.eigenvalues;

    SeriesDiagnostic diag;
    std::vector<double> terms;
    double sum = 0.0;
    for (int i = 0; i < n_terms; ++i) {
        const MomentMode& mode = modes[i];
        const Eigen::VectorXd& psi = mode.pair_index < 0
                                         ? eig.psi_z_for_y[mode.iy_pos]
                                         : eig.pairs[mode.pair_index].psi1_z;
        // (S_Z(t1) x_Z0, psi) = sum_k e^{nu_k t1} x_Z0[k] psi[k], assembled
        // around the largest log magnitude.
        double mx = -kInf;
        for (int k = 0; k < model.nz(); ++k) {
            const double prod = x_z0[k] * psi[k];
            if (prod == 0.0) continue;
            mx = std::max(mx, nu[k] * t1 + std::log(std::abs(prod)));
        }
        double term = 0.0;
        if (std::isfinite(mx)) {
            double acc = 0.0;
            for (int k = 0; k < model.nz(); ++k) {
                const double prod = x_z0[k] * psi[k];
                if (prod == 0.0) continue;
                const double a = nu[k] * t1 + std::log(std::abs(prod));
                acc += (prod > 0.0 ? 1.0 : -1.0) * std::exp(a - mx);
            }
            if (acc != 0.0)
                term = std::exp(-2.0 * mode.lambda * t1 +
                                2.0 * (mx + std::log(std::abs(acc))));
        }
        sum += term;
        terms.push_back(term);
        diag.partial_sums.push_back(sum);
        if (!std::isfinite(sum) || sum > divergence_ceiling) {
            diag.verdict = SeriesVerdict::Divergent;
            return diag;
        }
    }

    // Convergence evidence: either the last ten relative increments sit
    // below tail_tol, or the increments follow a power law with exponent
    // below -1 (summable tail).
    const int n = static_cast<int>(terms.size());
    if (n >= 1) {
        const int window = std::min(10, n);
        bool tiny_tail = true;
        for (int i = n - window; i < n; ++i)
            if (terms[i] > series_tail_tol * sum) tiny_tail = false;
        if (tiny_tail && n >= window) {
            diag.verdict = SeriesVerdict::Convergent;
            return diag;
        }
        std::vector<double> xs, ys;
        for (int i = n / 2; i < n; ++i) {
            if (terms[i] <= 0.0) continue;
            xs.push_back(std::log(static_cast<double>(i + 1)));
            ys.push_back(std::log(terms[i]));
        }
        const LineFit fit = linear_fit(xs, ys);
        if (fit.ok && xs.size() >= 3 && fit.slope <= -1.1 && fit.r2 >= 0.99) {
            diag.verdict = SeriesVerdict::Convergent;
            return diag;
        }
    }
    diag.verdict = SeriesVerdict::Inconclusive;
    return diag;
}

} // namespace mcontrol

#pragma once

#include <cstddef>
#include <vector>

namespace mcontrol {

// Below this rate magnitude the integral primitive switches to its Taylor
// branch, so that near-cancelling rate pairs keep full precision.
inline constexpr double rate_zero_tol = 1e-12;

/// One term  coeff * t^degree * exp(log_weight + rate * t).
///
/// log_weight keeps huge or tiny magnitudes out of the mantissa: a kernel
/// like e^{n^2 t} rescaled by e^{-n^2 t1} is stored with coeff O(1) and
/// log_weight = -n^2 t1, and every integral below combines the weights in
/// log space before exponentiating.
struct ExpTerm {
    double coeff = 0.0;
    double rate = 0.0;
    int degree = 0; // 0 or 1
    double log_weight = 0.0;
};

/// Finite sum of exponential terms on [0, t1], closed under the operations
/// needed for moment kernels, semigroup coordinates and controls.
///
/// Canonical form: terms sorted by (rate, degree), equal (rate, degree)
/// merged, zero coefficients dropped.
class ExponentialSum {
public:
    ExponentialSum() = default;
    explicit ExponentialSum(std::vector<ExpTerm> terms);

    static ExponentialSum single(double coeff, double rate, int degree = 0,
                                 double log_weight = 0.0);

    const std::vector<ExpTerm>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    /// Multiply the whole sum by e^{delta} (adjusts every log_weight).
    ExponentialSum scaled_by_log(double delta) const;

private:
    std::vector<ExpTerm> terms_;
};

/// exp-moment primitive: integral of t^degree * e^{rho t + s} over [0, T],
/// degree in {0, 1, 2}. Safe against cancellation at rho ~ 0 and against
/// overflow when s compensates a large rho*T.
double exp_moment_integral(double rho, double s, double T, int degree);

/// Pointwise value of the sum at t.
double evaluate(const ExponentialSum& es, double t);

/// L2(0, t1) inner product, exact closed form (no quadrature).
double inner_product(const ExponentialSum& a, const ExponentialSum& b, double t1);

/// Adaptive-panel oracle for inner_product; test/diagnostic use only.
/// Throws ToleranceNotReached when the panel budget is exhausted.
double quadrature_inner_product(const ExponentialSum& a, const ExponentialSum& b,
                                double t1, double abs_tol);

/// alpha * a + beta * b, canonicalized.
ExponentialSum scale_add(double alpha, const ExponentialSum& a, double beta,
                         const ExponentialSum& b);

/// sqrt of the (clamped nonnegative) squared L2 norm on [0, t1].
double l2_norm(const ExponentialSum& es, double t1);

} // namespace mcontrol

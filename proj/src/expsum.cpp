#include "mcontrol/expsum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcontrol/errors.hpp"

namespace mcontrol {

namespace {

bool term_order(const ExpTerm& a, const ExpTerm& b)
{
    if (a.rate != b.rate) return a.rate < b.rate;
    return a.degree < b.degree;
}

void check_term(const ExpTerm& t)
{
    if (!std::isfinite(t.coeff) || !std::isfinite(t.rate) || !std::isfinite(t.log_weight))
        throw ValidationError("ExponentialSum: non-finite term");
    if (t.degree < 0 || t.degree > 1)
        throw ValidationError("ExponentialSum: term degree must be 0 or 1");
}

// Merge (c1, w1) + (c2, w2) at equal (rate, degree): keep the larger weight
// so the smaller contribution underflows only when it is negligible at
// every t.
void merge_into(double& c, double& w, double c2, double w2)
{
    if (c == 0.0) { c = c2; w = w2; return; }
    if (c2 == 0.0) return;
    const double wm = std::max(w, w2);
    c = c * std::exp(w - wm) + c2 * std::exp(w2 - wm);
    w = wm;
}

} // namespace

ExponentialSum::ExponentialSum(std::vector<ExpTerm> terms)
{
    for (const auto& t : terms) check_term(t);
    std::sort(terms.begin(), terms.end(), term_order);
    terms_.reserve(terms.size());
    for (const auto& t : terms) {
        if (t.coeff == 0.0) continue;
        if (!terms_.empty() && terms_.back().rate == t.rate &&
            terms_.back().degree == t.degree) {
            merge_into(terms_.back().coeff, terms_.back().log_weight, t.coeff,
                       t.log_weight);
            if (terms_.back().coeff == 0.0) terms_.pop_back();
        } else {
            terms_.push_back(t);
        }
    }
}

ExponentialSum ExponentialSum::single(double coeff, double rate, int degree,
                                      double log_weight)
{
    return ExponentialSum({ExpTerm{coeff, rate, degree, log_weight}});
}

ExponentialSum ExponentialSum::scaled_by_log(double delta) const
{
    std::vector<ExpTerm> out = terms_;
    for (auto& t : out) t.log_weight += delta;
    return ExponentialSum(std::move(out));
}

double exp_moment_integral(double rho, double s, double T, int degree)
{
    if (T == 0.0) return 0.0;
    const double x = rho * T;

    // Taylor branch: sum_m x^m / (m! (m + degree + 1)); covers |rho| below
    // rate_zero_tol and the whole region where the closed form cancels.
    if (std::abs(x) < 0.5) {
        double sum = 1.0 / (degree + 1);
        double xp = 1.0;
        double fact = 1.0;
        for (int m = 1; m < 40; ++m) {
            xp *= x;
            fact *= m;
            const double term = xp / (fact * (m + degree + 1));
            sum += term;
            if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
        }
        double tp = T;
        for (int d = 0; d < degree; ++d) tp *= T;
        return std::exp(s) * tp * sum;
    }

    // Closed form, with the boundary exponentials evaluated at the combined
    // log arguments so that s can compensate a large x.
    const double e1 = std::exp(x + s);
    const double e0 = std::exp(s);
    switch (degree) {
    case 0:
        return T * (e1 - e0) / x;
    case 1:
        return T * T * ((x - 1.0) * e1 + e0) / (x * x);
    default:
        return T * T * T * (((x - 2.0) * x + 2.0) * e1 - 2.0 * e0) / (x * x * x);
    }
}

double evaluate(const ExponentialSum& es, double t)
{
    double sum = 0.0;
    for (const auto& tm : es.terms()) {
        double v = tm.coeff * std::exp(tm.log_weight + tm.rate * t);
        if (tm.degree == 1) v *= t;
        sum += v;
    }
    return sum;
}

double inner_product(const ExponentialSum& a, const ExponentialSum& b, double t1)
{
    if (t1 <= 0.0) throw NonPositiveHorizon("inner_product: t1 must be positive");
    double sum = 0.0;
    for (const auto& ta : a.terms())
        for (const auto& tb : b.terms())
            sum += ta.coeff * tb.coeff *
                   exp_moment_integral(ta.rate + tb.rate,
                                       ta.log_weight + tb.log_weight, t1,
                                       ta.degree + tb.degree);
    return sum;
}

namespace {

struct AdaptiveQuad {
    const ExponentialSum& a;
    const ExponentialSum& b;
    long panels_left;

    double f(double t) const { return evaluate(a, t) * evaluate(b, t); }

    double run(double lo, double hi, double flo, double fmid, double fhi,
               double whole, double tol)
    {
        if (--panels_left < 0)
            throw ToleranceNotReached("quadrature_inner_product: panel budget exhausted");
        const double mid = 0.5 * (lo + hi);
        const double lm = f(0.5 * (lo + mid));
        const double rm = f(0.5 * (mid + hi));
        const double h = hi - lo;
        const double left = (h / 12.0) * (flo + 4.0 * lm + fmid);
        const double right = (h / 12.0) * (fmid + 4.0 * rm + fhi);
        const double err = left + right - whole;
        if (std::abs(err) <= 15.0 * tol)
            return left + right + err / 15.0;
        return run(lo, mid, flo, lm, fmid, left, 0.5 * tol) +
               run(mid, hi, fmid, rm, fhi, right, 0.5 * tol);
    }
};

} // namespace

double quadrature_inner_product(const ExponentialSum& a, const ExponentialSum& b,
                                double t1, double abs_tol)
{
    if (t1 <= 0.0) throw NonPositiveHorizon("quadrature_inner_product: t1 must be positive");
    AdaptiveQuad q{a, b, 4'000'000};
    const double flo = q.f(0.0);
    const double fmid = q.f(0.5 * t1);
    const double fhi = q.f(t1);
    const double whole = (t1 / 6.0) * (flo + 4.0 * fmid + fhi);
    return q.run(0.0, t1, flo, fmid, fhi, whole, abs_tol);
}

ExponentialSum scale_add(double alpha, const ExponentialSum& a, double beta,
                         const ExponentialSum& b)
{
    std::vector<ExpTerm> out;
    out.reserve(a.size() + b.size());
    for (auto t : a.terms()) {
        t.coeff *= alpha;
        out.push_back(t);
    }
    for (auto t : b.terms()) {
        t.coeff *= beta;
        out.push_back(t);
    }
    return ExponentialSum(std::move(out));
}

double l2_norm(const ExponentialSum& es, double t1)
{
    if (es.empty()) return 0.0;
    return std::sqrt(std::max(0.0, inner_product(es, es, t1)));
}

} // namespace mcontrol

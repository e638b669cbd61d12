#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mcontrol/errors.hpp"
#include "mcontrol/moment.hpp"

using namespace mcontrol;

namespace {

CoupledModel tiny_model()
{
    Eigen::MatrixXd C(1, 1);
    C << 1.0;
    Eigen::VectorXd by(1), bz(1);
    by << 1.0;
    bz << 0.0;
    return build_coupled_model({{-1.0}, {}}, {{-2.0}, {}}, C, by, bz, 1.0);
}

CoupledModel example1_model(int n, double t1 = 1.0)
{
    std::vector<double> ly, lz;
    Eigen::VectorXd by(n), bz = Eigen::VectorXd::Zero(n);
    for (int m = 1; m <= n; ++m) {
        ly.push_back(1.0 - m * m);
        lz.push_back(-1.0 * m * m);
        by[m - 1] = std::sqrt(2.0 / M_PI) * M_PI * ((m % 2 == 1) ? 1.0 : -1.0) / m;
    }
    return build_coupled_model({ly, {}}, {lz, {}}, Eigen::MatrixXd::Identity(n, n), by, bz,
                               t1);
}

CoupledModel example2_model(int n, double alpha = 1.0, double t1 = 1.0)
{
    std::vector<double> lam;
    Eigen::VectorXd by(n), bz = Eigen::VectorXd::Zero(n);
    for (int m = 1; m <= n; ++m) {
        lam.push_back(-1.0 * m * m);
        by[m - 1] = 1.0 / m;
    }
    return build_coupled_model({lam, {}}, {lam, {}},
                               alpha * Eigen::MatrixXd::Identity(n, n), by, bz, t1);
}

struct Setup {
    CoupledModel model;
    SpectrumPartition part;
    EigenSystem eig;
    KernelFamily family;
};

Setup setup_for(CoupledModel model, bool scaled)
{
    SpectrumPartition part = classify_spectra(model);
    EigenSystem eig = eigenstructure_overlap(model, part);
    KernelFamily fam = kernel_family(model, eig, part, scaled);
    return {std::move(model), std::move(part), std::move(eig), std::move(fam)};
}

} // namespace

TEST_CASE("moment_targets: zero state gives zero targets")
{
    const auto s = setup_for(example1_model(6), true);
    const auto tg = moment_targets(s.model, s.eig, s.part, Eigen::VectorXd::Zero(6),
                                   Eigen::VectorXd::Zero(6), s.model.t1);
    for (double d : tg.values) CHECK(d == 0.0);
}

TEST_CASE("moment_targets: hand instance value")
{
    const auto s = setup_for(tiny_model(), false);
    Eigen::VectorXd x0y(1), x0z(1);
    x0y << 1.0;
    x0z << 1.0;
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, x0z, 1.0, false);
    REQUIRE(tg.values.size() == 1);
    // d1 = -(1 + 1) + e^{1} e^{-2} = -2 + e^{-1}
    CHECK(tg.values[0] == doctest::Approx(-1.6321205588285577).epsilon(1e-14));

    const auto tg_scaled = moment_targets(s.model, s.eig, s.part, x0y, x0z, 1.0, true);
    CHECK(tg_scaled.values[0] ==
          doctest::Approx(std::exp(-1.0) * tg.values[0]).epsilon(1e-13));
}

TEST_CASE("moment_targets: Example-2 pair targets are -alpha t1 z0_n")
{
    const double alpha = 1.3, t1 = 0.7;
    const auto s = setup_for(example2_model(8, alpha, t1), false);
    Eigen::VectorXd x0y = Eigen::VectorXd::Zero(8), z0(8);
    for (int n = 1; n <= 8; ++n) z0[n - 1] = std::exp(-1.0 * n);
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, z0, t1, false);
    for (int i = 0; i < 8; ++i)
        CHECK(tg.values[i] == doctest::Approx(-alpha * t1 * z0[i]).epsilon(1e-12));
}

TEST_CASE("synthesize_control: zero targets give the zero control")
{
    const auto s = setup_for(example1_model(5), true);
    const auto tg = moment_targets(s.model, s.eig, s.part, Eigen::VectorXd::Zero(5),
                                   Eigen::VectorXd::Zero(5), s.model.t1);
    const auto sol = synthesize_control(tg, s.family, {5, 0.0, 1});
    CHECK(sol.l2_norm == 0.0);
    CHECK(sol.control.empty());
    for (double r : sol.residuals) CHECK(r == 0.0);
}

TEST_CASE("synthesize_control: hand instance reproduces the frozen solution")
{
    const auto s = setup_for(tiny_model(), false);
    Eigen::VectorXd x0y(1), x0z(1);
    x0y << 1.0;
    x0z << 1.0;
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, x0z, 1.0, false);
    const auto sol = synthesize_control(tg, s.family, {1, 0.0, 1});

    // G = (e^2 - 1)/2, c1 = d1 / G
    CHECK(sol.coefficients[0] == doctest::Approx(-0.51091132510222571).epsilon(1e-13));
    CHECK(sol.residuals[0] <= 1e-12);
    CHECK(sol.l2_norm ==
          doctest::Approx(std::abs(sol.coefficients[0]) *
                          std::sqrt((std::exp(2.0) - 1.0) / 2.0))
              .epsilon(1e-12));
}

TEST_CASE("synthesize_control: Example-1 residuals stay below solver_tol * |d|")
{
    const auto s = setup_for(example1_model(8), true);
    Eigen::VectorXd x0y(8), x0z(8);
    for (int m = 1; m <= 8; ++m) {
        x0y[m - 1] = 1.0 / (2.0 * m - 1.0);
        x0z[m - 1] = 1.0 / (2.0 * m);
    }
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, x0z, s.model.t1);
    const auto sol = synthesize_control(tg, s.family, {8, 0.0, 1});

    double dnorm = 0.0;
    for (double d : tg.values) dnorm += d * d;
    dnorm = std::sqrt(dnorm);
    for (double r : sol.residuals) CHECK(r <= solver_tol * dnorm);
    CHECK_FALSE(sol.regularization_fallback);
}

TEST_CASE("residual_report is consistent and linear in the coefficients")
{
    // well-conditioned truncation so the closed-form recomputation keeps
    // the full 1e-12 agreement
    const auto s = setup_for(example1_model(3), true);
    Eigen::VectorXd x0y = Eigen::VectorXd::Ones(3), x0z = Eigen::VectorXd::Ones(3);
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, x0z, s.model.t1);
    const int n = 3;
    const auto sol = synthesize_control(tg, s.family, {n, 0.0, 1});

    const auto rep = residual_report(sol, s.family, tg);
    for (int j = 0; j < n; ++j) CHECK(std::abs(rep[j]) <= 1e-9);

    // perturb the coefficients: the report must move by exactly G * delta
    const Eigen::MatrixXd G = gram_matrix(s.family, s.model.t1, n);
    Eigen::VectorXd delta(n);
    for (int j = 0; j < n; ++j) delta[j] = 1e-3 * (j + 1);
    ControlSolution bent = sol;
    for (int j = 0; j < n; ++j) {
        bent.coefficients[j] += delta[j];
        bent.control = scale_add(1.0, bent.control, delta[j], s.family.kernels[j]);
    }
    const auto rep2 = residual_report(bent, s.family, tg);
    const Eigen::VectorXd expected = G * delta;
    for (int j = 0; j < n; ++j)
        CHECK(std::abs((rep2[j] - rep[j]) - expected[j]) <= 1e-12);
}

TEST_CASE("zero targets and zero control report zero residuals")
{
    const auto s = setup_for(example1_model(4), true);
    const auto tg = moment_targets(s.model, s.eig, s.part, Eigen::VectorXd::Zero(4),
                                   Eigen::VectorXd::Zero(4), s.model.t1);
    ControlSolution none;
    none.n_synth = 4;
    const auto rep = residual_report(none, s.family, tg);
    for (double r : rep) CHECK(r == 0.0);
}

TEST_CASE("least-norm property: orthogonal additions cannot shrink the norm")
{
    const auto s = setup_for(example1_model(4), true);
    Eigen::VectorXd x0y = Eigen::VectorXd::Ones(4), x0z = Eigen::VectorXd::Ones(4);
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, x0z, s.model.t1);
    const int n = 4;
    const auto sol = synthesize_control(tg, s.family, {n, 0.0, 1});

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        ExponentialSum v({{u(rng), -0.45, 0, 0.0}, {u(rng), -1.3, 0, 0.0},
                          {u(rng), 0.8, 0, 0.0}});
        // project v out of the kernel span
        const Eigen::MatrixXd G = gram_matrix(s.family, s.model.t1, n);
        Eigen::VectorXd m(n);
        for (int j = 0; j < n; ++j) m[j] = inner_product(s.family.kernels[j], v, s.model.t1);
        const Eigen::VectorXd a = G.ldlt().solve(m);
        ExponentialSum vperp = v;
        for (int j = 0; j < n; ++j)
            vperp = scale_add(1.0, vperp, -a[j], s.family.kernels[j]);

        for (int j = 0; j < n; ++j)
            CHECK(std::abs(inner_product(s.family.kernels[j], vperp, s.model.t1)) <= 1e-8);

        const ExponentialSum worse = scale_add(1.0, sol.control, 1.0, vperp);
        CHECK(l2_norm(worse, s.model.t1) >= sol.l2_norm - 1e-12);

        ControlSolution bent = sol;
        bent.control = worse;
        const auto rep = residual_report(bent, s.family, tg);
        for (int j = 0; j < n; ++j) CHECK(std::abs(rep[j]) <= 1e-7);
    }
}

TEST_CASE("tikhonov monotonicity: larger ridge, smaller control")
{
    const auto s = setup_for(example1_model(6), true);
    Eigen::VectorXd x0y = Eigen::VectorXd::Ones(6), x0z = Eigen::VectorXd::Ones(6);
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, x0z, s.model.t1);
    double last = 1e300;
    for (double tik : {0.0, 1e-8, 1e-4, 1e-2}) {
        const auto sol = synthesize_control(tg, s.family, {6, tik, 1});
        CHECK(sol.l2_norm <= last + 1e-12);
        last = sol.l2_norm;
    }
}

TEST_CASE("scaled and unscaled synthesis produce the same control")
{
    // |lambda|_max * t1 = 16 here, so the unscaled route stays representable
    const auto scaled = setup_for(example1_model(4), true);
    const auto plain = setup_for(example1_model(4), false);
    Eigen::VectorXd x0y = Eigen::VectorXd::Ones(4), x0z = Eigen::VectorXd::Ones(4);
    const auto tg_s = moment_targets(scaled.model, scaled.eig, scaled.part, x0y, x0z,
                                     scaled.model.t1, true);
    const auto tg_p = moment_targets(plain.model, plain.eig, plain.part, x0y, x0z,
                                     plain.model.t1, false);
    const auto sol_s = synthesize_control(tg_s, scaled.family, {4, 0.0, 1});
    const auto sol_p = synthesize_control(tg_p, plain.family, {4, 0.0, 1});
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double a = evaluate(sol_s.control, t);
        const double b = evaluate(sol_p.control, t);
        CHECK(std::abs(a - b) <= 1e-8 * std::max({std::abs(a), std::abs(b), 1.0}));
    }
}

TEST_CASE("norm representation consistency: |u|^2 = c^T G c")
{
    const auto s = setup_for(example2_model(6), true);
    Eigen::VectorXd x0y = Eigen::VectorXd::Zero(6), z0(6);
    for (int n = 1; n <= 6; ++n) z0[n - 1] = std::exp(-1.0 * n);
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, z0, s.model.t1);
    const auto sol = synthesize_control(tg, s.family, {6, 0.0, 1});

    const Eigen::MatrixXd G = gram_matrix(s.family, s.model.t1, 6);
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(sol.coefficients.data(), 6);
    const double quad = c.dot(G * c);
    CHECK(sol.l2_norm * sol.l2_norm == doctest::Approx(quad).epsilon(1e-10));
}

TEST_CASE("reduced-y0 targets match the coupled targets when b_z = 0")
{
    const auto s = setup_for(example1_model(6), false);
    Eigen::VectorXd x0y(6), x0z(6);
    for (int m = 1; m <= 6; ++m) {
        x0y[m - 1] = std::sin(1.0 + m);
        x0z[m - 1] = std::cos(0.5 * m);
    }
    const auto tg = moment_targets(s.model, s.eig, s.part, x0y, x0z, s.model.t1, false);

    // equivalent reduced initial state: y0_j = -d_j in reference coordinates
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(6);
    const auto modes = moment_mode_order(s.model, s.part);
    for (std::size_t i = 0; i < modes.size(); ++i) y0[modes[i].y_index] = -tg.values[i];
    const auto tg_red = moment_targets(s.model, s.eig, s.part, y0,
                                       Eigen::VectorXd::Zero(6), s.model.t1, false);
    for (std::size_t i = 0; i < tg.values.size(); ++i)
        CHECK(tg.values[i] == doctest::Approx(tg_red.values[i]).epsilon(1e-12));
}

TEST_CASE("singular Gram falls back to a flagged ridge")
{
    KernelFamily fam;
    fam.scaled = false;
    fam.t1 = 1.0;
    for (int i = 0; i < 2; ++i) {
        fam.kernels.push_back(ExponentialSum::single(1.0, -1.0)); // identical kernels
        fam.modes.push_back({1.0, i, i, -1, "k"});
        fam.mode_ids.push_back("k");
        fam.log_scale.push_back(0.0);
    }
    MomentTargets tg;
    tg.values = {1.0, 1.0};
    tg.mode_ids = {"k", "k"};
    tg.lambdas = {-1.0, -1.0};
    tg.scaled = false;
    tg.log_scale = {0.0, 0.0};
    tg.t1 = 1.0;

    const auto sol = synthesize_control(tg, fam, {2, 0.0, 1});
    CHECK(sol.regularization_fallback);
    CHECK(sol.regularization > 0.0);
    CHECK(sol.ill_conditioned);
}

TEST_CASE("option validation")
{
    const auto s = setup_for(tiny_model(), true);
    const auto tg = moment_targets(s.model, s.eig, s.part, Eigen::VectorXd::Ones(1),
                                   Eigen::VectorXd::Ones(1), 1.0);
    CHECK_THROWS_AS(synthesize_control(tg, s.family, {5, 0.0, 1}), DimensionMismatch);
    CHECK_THROWS_AS(synthesize_control(tg, s.family, {1, -1.0, 1}), ValidationError);
    const auto tg_plain = moment_targets(s.model, s.eig, s.part, Eigen::VectorXd::Ones(1),
                                         Eigen::VectorXd::Ones(1), 1.0, false);
    CHECK_THROWS_AS(synthesize_control(tg_plain, s.family, {1, 0.0, 1}), ValidationError);
}

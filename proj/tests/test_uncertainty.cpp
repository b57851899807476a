#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <psmpc/uncertainty.hpp>

#include "oracles.hpp"

using namespace psmpc::uncertainty;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DistributionSpec uniform_box(const VectorXd& lo, const VectorXd& hi) {
    return DistributionSpec({UniformBoxBlock{lo, hi}});
}

DistributionSpec gaussian(const VectorXd& mean, const MatrixXd& cov) {
    return DistributionSpec({GaussianBlock{mean, cov}});
}

}  // namespace

TEST_CASE("draw is reproducible and index-addressed") {
    auto spec = gaussian(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
    SampleStream stream{42, 7};
    auto a = draw(spec, stream, 20);
    auto b = draw(spec, stream, 20);
    REQUIRE(a.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(a[i] == b[i]);  // byte-identical

    // A longer draw must reproduce the shorter one as its prefix.
    auto c = draw(spec, stream, 25);
    for (int i = 0; i < 20; ++i) CHECK(a[i] == c[i]);

    // Different seeds / streams decorrelate.
    auto d = draw(spec, SampleStream{43, 7}, 20);
    auto e = draw(spec, SampleStream{42, 8}, 20);
    CHECK(a[0] != d[0]);
    CHECK(a[0] != e[0]);
}

TEST_CASE("degenerate uniform interval yields constants") {
    auto spec = uniform_box(VectorXd::Zero(1), VectorXd::Zero(1));
    auto samples = draw(spec, SampleStream{1, 0}, 5);
    for (const auto& s : samples) CHECK(s(0) == 0.0);
}

TEST_CASE("gaussian sample mean obeys the CLT envelope") {
    const int N = 100000;
    auto spec = gaussian(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    SampleStream stream{2024, 0};
    VectorXd mean = VectorXd::Zero(2);
    for (int i = 0; i < N; ++i) {
        RngEngine eng = stream.engine_at(static_cast<std::uint64_t>(i));
        mean += spec.sample(eng);
    }
    mean /= N;
    const double envelope = 3.0 / std::sqrt(static_cast<double>(N));
    CHECK(std::abs(mean(0)) <= envelope);
    CHECK(std::abs(mean(1)) <= envelope);
}

TEST_CASE("gaussian sample covariance approaches the target") {
    const int N = 100000;
    MatrixXd cov(2, 2);
    cov << 2.0, 0.6, 0.6, 1.0;
    auto spec = gaussian(VectorXd::Zero(2), cov);
    SampleStream stream{5, 3};
    MatrixXd second = MatrixXd::Zero(2, 2);
    for (int i = 0; i < N; ++i) {
        RngEngine eng = stream.engine_at(static_cast<std::uint64_t>(i));
        VectorXd q = spec.sample(eng);
        second += q * q.transpose();
    }
    second /= N;
    CHECK((second - cov).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("uniform moments and normal tail sanity") {
    const int N = 100000;
    SampleStream stream{99, 0};
    double sum = 0.0, sum_sq = 0.0;
    int tail = 0;
    for (int i = 0; i < N; ++i) {
        RngEngine eng = stream.engine_at(static_cast<std::uint64_t>(i));
        double u = eng.uniform(0.5, 1.5);
        sum += u;
        double z = eng.normal();
        sum_sq += z * z;
        if (std::abs(z) > 1.959963984540054) ++tail;
    }
    const double mean_u = sum / N;
    const double sigma_u = 1.0 / std::sqrt(12.0);
    CHECK(std::abs(mean_u - 1.0) <= 3.0 * sigma_u / std::sqrt(static_cast<double>(N)));
    CHECK(std::abs(sum_sq / N - 1.0) <= 0.05);
    CHECK(std::abs(static_cast<double>(tail) / N - 0.05) <= 0.01);
}

TEST_CASE("substreams are deterministic and decorrelated") {
    SampleStream base{7, 0};
    auto s0 = base.substream(0);
    auto s0_again = base.substream(0);
    CHECK(s0.stream == s0_again.stream);
    CHECK(s0.seed == base.seed);
    auto s1 = base.substream(1);
    CHECK(s0.stream != s1.stream);

    const int N = 10000;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < N; ++i) {
        double x = s0.engine_at(static_cast<std::uint64_t>(i)).uniform();
        double y = s1.engine_at(static_cast<std::uint64_t>(i)).uniform();
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const double mx = sx / N, my = sy / N;
    const double vx = sxx / N - mx * mx, vy = syy / N - my * my;
    const double cxy = sxy / N - mx * my;
    const double rho = cxy / std::sqrt(vx * vy);
    CHECK(std::abs(rho) <= 4.0 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("invalid specifications are rejected at construction") {
    MatrixXd bad_cov(2, 2);
    bad_cov << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
    CHECK_THROWS_AS(gaussian(VectorXd::Zero(2), bad_cov), std::invalid_argument);

    MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.1, 1.0;
    CHECK_THROWS_AS(gaussian(VectorXd::Zero(2), asym), std::invalid_argument);

    VectorXd lo(2), hi(2);
    lo << 0, 1;
    hi << 1, 0;  // second coordinate inverted
    CHECK_THROWS_AS(uniform_box(lo, hi), std::invalid_argument);

    CHECK_THROWS_AS(DistributionSpec({ScalarFactorBlock{1.0, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(DistributionSpec({}), std::invalid_argument);
}

TEST_CASE("rank-deficient covariance is accepted and respected") {
    MatrixXd cov(2, 2);
    cov << 1.0, 1.0, 1.0, 1.0;  // rank one: both coordinates equal
    auto spec = gaussian(VectorXd::Zero(2), cov);
    auto samples = draw(spec, SampleStream{11, 0}, 100);
    for (const auto& q : samples) CHECK(std::abs(q(0) - q(1)) <= 1e-12);
}

TEST_CASE("affine constraint system realizes as expected") {
    MatrixXd F0(2, 2);
    F0 << 1, 0, 0, 1;
    MatrixXd F1(2, 2);
    F1 << 0, 1, 1, 0;
    VectorXd g0(2);
    g0 << 1, 2;
    VectorXd g1(2);
    g1 << 0.5, -0.5;
    auto sys = UncertainConstraintSystem::affine(F0, {F1}, g0, {g1});
    CHECK(sys.dimension() == 2);
    CHECK(sys.rows() == 2);
    VectorXd q(1);
    q << 2.0;
    auto r = sys.realize(q);
    CHECK((r.F - (F0 + 2.0 * F1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.g - (g0 + 2.0 * g1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scaled-direction system matches raw sample layout") {
    // Factor in [0.5, 1.5]; direction pinned to e1 by a degenerate box.
    VectorXd e1(2);
    e1 << 1, 0;
    DistributionSpec spec({ScalarFactorBlock{0.5, 1.5}, UniformBoxBlock{e1, e1}});
    auto sys = UncertainConstraintSystem::scaled_direction(2, 1.0);
    SampleStream stream{300, 1};
    auto samples = draw(spec, stream, 50);
    auto scen = realize_scenarios(sys, spec, stream, 50);
    REQUIRE(scen.scenarios.size() == 50);
    for (int i = 0; i < 50; ++i) {
        const auto& r = scen.scenarios[static_cast<std::size_t>(i)];
        const double q1 = samples[static_cast<std::size_t>(i)](0);
        CHECK(q1 >= 0.5);
        CHECK(q1 <= 1.5);
        CHECK(r.F(0, 0) == q1);
        CHECK(r.F(0, 1) == 0.0);
        CHECK(r.g(0) == 1.0);
    }
}

TEST_CASE("scaled-direction composition mean factor near one") {
    MatrixXd cov = MatrixXd::Identity(3, 3);
    DistributionSpec spec({ScalarFactorBlock{0.5, 1.5}, GaussianBlock{VectorXd::Zero(3), cov}});
    CHECK(spec.dimension() == 4);
    const int N = 20000;
    SampleStream stream{17, 0};
    double mean_factor = 0.0;
    for (const auto& q : draw(spec, stream, N)) mean_factor += q(0);
    mean_factor /= N;
    const double sigma = (1.0 / std::sqrt(12.0)) / std::sqrt(static_cast<double>(N));
    CHECK(std::abs(mean_factor - 1.0) <= 3.0 * sigma);
}

TEST_CASE("zero-variance scenarios repeat identically") {
    VectorXd fixed(1);
    fixed << 0.75;
    DistributionSpec spec({UniformBoxBlock{fixed, fixed}});
    MatrixXd F0(1, 2);
    F0 << 1, 1;
    auto sys = UncertainConstraintSystem::affine(F0, {MatrixXd::Zero(1, 2)},
                                                 VectorXd::Ones(1), {VectorXd::Zero(1)});
    auto scen = realize_scenarios(sys, spec, SampleStream{0, 0}, 10);
    for (const auto& r : scen.scenarios) {
        CHECK(r.F == scen.scenarios.front().F);
        CHECK(r.g == scen.scenarios.front().g);
    }
    CHECK_THROWS_AS(realize_scenarios(sys, spec, SampleStream{0, 0}, 0), std::invalid_argument);
}

TEST_CASE("violation indicator equals the per-row maximum form") {
    auto sys = UncertainConstraintSystem::callback(2, 3, [](const VectorXd& q) {
        Realization r;
        r.F = MatrixXd(3, 2);
        r.F << q(0), q(1), -q(1), q(0), 1.0, 1.0;
        r.g = VectorXd(3);
        r.g << 1.0, 1.0, 2.0 + q(0);
        return r;
    });

    VectorXd origin = VectorXd::Zero(2);
    VectorXd q0(2);
    q0 << 0.3, -0.2;
    CHECK(violation_indicator(sys, origin, q0) == 0);

    auto single = UncertainConstraintSystem::callback(2, 1, [](const VectorXd&) {
        Realization r;
        r.F = MatrixXd(1, 2);
        r.F << 1, 0;
        r.g = VectorXd::Ones(1);
        return r;
    });
    VectorXd far(2);
    far << 2, 0;
    CHECK(violation_indicator(single, far, VectorXd::Zero(1)) == 1);

    // Agreement with the explicit per-row indicator product on random input.
    SampleStream stream{255, 0};
    for (int i = 0; i < 10000; ++i) {
        RngEngine eng = stream.engine_at(static_cast<std::uint64_t>(i));
        VectorXd q(2), xi(2);
        q << eng.normal(), eng.normal();
        xi << 4.0 * (eng.uniform() - 0.5), 4.0 * (eng.uniform() - 0.5);
        auto r = sys.realize(q);
        int any_row = 0;
        for (int j = 0; j < 3; ++j)
            if (r.F.row(j).dot(xi) > r.g(j)) any_row = 1;
        CHECK(violation_indicator(sys, xi, q) == any_row);
    }
}

TEST_CASE("callback realizations must keep declared dimensions") {
    auto sys = UncertainConstraintSystem::callback(2, 1, [](const VectorXd&) {
        Realization r;
        r.F = MatrixXd::Zero(2, 2);  // claims one row, returns two
        r.g = VectorXd::Zero(2);
        return r;
    });
    CHECK_THROWS_AS(sys.realize(VectorXd::Zero(1)), std::runtime_error);
}

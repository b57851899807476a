#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <psmpc/errors.hpp>
#include <psmpc/polytope.hpp>
#include <random>

#include "oracles.hpp"

using namespace psmpc::polytope;
using psmpc::uncertainty::SampleStream;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

HPolytope unit_square() {
    MatrixXd A(4, 2);
    A << 1, 0, -1, 0, 0, 1, 0, -1;
    VectorXd b = VectorXd::Ones(4);
    return HPolytope(A, b);
}

HPolytope random_bounded_poly(std::mt19937& gen, int n, int extra) {
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd A(extra + 2 * n, n);
    VectorXd b(extra + 2 * n);
    for (int i = 0; i < extra; ++i) {
        for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
        b(i) = std::abs(nd(gen)) + 0.2;
    }
    A.bottomRows(2 * n).setZero();
    for (int j = 0; j < n; ++j) {
        A(extra + 2 * j, j) = 1.0;
        b(extra + 2 * j) = 3.0;
        A(extra + 2 * j + 1, j) = -1.0;
        b(extra + 2 * j + 1) = 3.0;
    }
    return HPolytope(A, b);
}

}  // namespace

TEST_CASE("construction drops vacuous rows and flags empties") {
    MatrixXd A(3, 2);
    A << 1, 0, 0, 0, 0, 1;
    VectorXd b(3);
    b << 1, 5, 1;  // middle row is 0'x <= 5: vacuous
    HPolytope poly(A, b);
    CHECK(poly.rows() == 2);
    CHECK_FALSE(poly.marked_empty());

    b(1) = -1;  // 0'x <= -1: unsatisfiable
    HPolytope empty(A, b);
    CHECK(empty.marked_empty());
    CHECK_FALSE(empty.contains(VectorXd::Zero(2)));

    CHECK_THROWS_AS(HPolytope(MatrixXd::Zero(0, 2), VectorXd::Zero(0)), std::invalid_argument);
}

TEST_CASE("support on the unit square and a halfspace") {
    auto sq = unit_square();
    VectorXd f(2);
    f << 1, 1;
    auto sv = support(sq, f);
    REQUIRE(sv.bounded);
    CHECK(sv.value == doctest::Approx(2.0).epsilon(1e-10));

    MatrixXd A(1, 2);
    A << 1, 0;
    HPolytope half(A, VectorXd::Ones(1));
    VectorXd up(2);
    up << 0, 1;
    auto sv2 = support(half, up);
    CHECK_FALSE(sv2.bounded);
}

TEST_CASE("support of an empty polytope throws") {
    MatrixXd A(2, 1);
    A << 1, -1;
    VectorXd b(2);
    b << -1, -2;  // x <= -1 and x >= 2
    HPolytope empty(A, b);
    VectorXd f(1);
    f << 1;
    CHECK_THROWS_AS(support(empty, f), psmpc::EmptySetError);

    MatrixXd Az(1, 1);
    Az << 0;
    HPolytope marked(Az, VectorXd::Constant(1, -1.0));
    CHECK_THROWS_AS(support(marked, f), psmpc::EmptySetError);
}

TEST_CASE("support matches vertex enumeration on random polytopes") {
    std::mt19937 gen(555);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto poly = random_bounded_poly(gen, 3, 6);
        VectorXd f(3);
        for (int j = 0; j < 3; ++j) f(j) = nd(gen);
        auto sv = support(poly, f);
        REQUIRE(sv.bounded);
        double ref = oracle::support_by_vertices(poly.A(), poly.b(), f);
        CHECK(sv.value == doctest::Approx(ref).epsilon(1e-8).scale(1.0 + std::abs(ref)));
    }
}

TEST_CASE("support is positively homogeneous and sublinear") {
    std::mt19937 gen(808);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        auto poly = random_bounded_poly(gen, 3, 5);
        VectorXd f(3), g(3);
        for (int j = 0; j < 3; ++j) {
            f(j) = nd(gen);
            g(j) = nd(gen);
        }
        const double sf = support(poly, f).value;
        const double sg = support(poly, g).value;
        const double s2f = support(poly, VectorXd(2.5 * f)).value;
        const double sfg = support(poly, VectorXd(f + g)).value;
        CHECK(s2f == doctest::Approx(2.5 * sf).epsilon(1e-8).scale(1.0 + std::abs(sf)));
        CHECK(sfg <= sf + sg + 1e-8 * (1.0 + std::abs(sf) + std::abs(sg)));
    }
}

TEST_CASE("chebyshev center of the unit square") {
    auto ball = chebyshev_center(unit_square());
    CHECK(ball.radius == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ball.center.lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("chebyshev center of the standard triangle") {
    MatrixXd A(3, 2);
    A << -1, 0, 0, -1, 1, 1;
    VectorXd b(3);
    b << 0, 0, 1;
    auto ball = chebyshev_center(HPolytope(A, b));
    const double r_expected = 1.0 / (2.0 + std::sqrt(2.0));
    CHECK(ball.radius == doctest::Approx(r_expected).epsilon(1e-9));
    CHECK(ball.center(0) == doctest::Approx(r_expected).epsilon(1e-8));
    CHECK(ball.center(1) == doctest::Approx(r_expected).epsilon(1e-8));
}

TEST_CASE("chebyshev center error cases") {
    MatrixXd A(1, 2);
    A << 1, 0;
    CHECK_THROWS_AS(chebyshev_center(HPolytope(A, VectorXd::Ones(1))), psmpc::UnboundedSetError);

    MatrixXd Ae(2, 1);
    Ae << 1, -1;
    VectorXd be(2);
    be << -1, -2;
    CHECK_THROWS_AS(chebyshev_center(HPolytope(Ae, be)), psmpc::EmptySetError);
}

TEST_CASE("chebyshev ball is contained rowwise") {
    std::mt19937 gen(4242);
    for (int trial = 0; trial < 30; ++trial) {
        auto poly = random_bounded_poly(gen, 3, 7);
        auto ball = chebyshev_center(poly);
        CHECK(ball.radius > 0.0);
        for (int i = 0; i < poly.rows(); ++i) {
            const double lhs = poly.A().row(i).dot(ball.center) + ball.radius * poly.A().row(i).norm();
            CHECK(lhs <= poly.b()(i) + 1e-8 * (1.0 + std::abs(poly.b()(i))));
        }
    }
}

TEST_CASE("scaling about a center: identity, collapse, affine-map equality") {
    auto sq = unit_square();
    VectorXd xc(2);
    xc << 0.5, 0.0;
    CenteredPolytope cp(sq, xc);

    auto same = scale_about(cp, 1.0);
    CHECK((same.A() - sq.A()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((same.b() - sq.b()).cwiseAbs().maxCoeff() == 0.0);

    auto point = scale_about(cp, 0.0);
    CHECK((point.b() - sq.A() * xc).cwiseAbs().maxCoeff() == 0.0);
    CHECK(point.contains(xc, 1e-15));

    // Membership of the affine image x_c + gamma (s - x_c) in the scaled set
    // must match membership of s in the original:
    // A (x_c + gamma (s - x_c)) - (gamma b + (1-gamma) A x_c) = gamma (A s - b).
    const double gamma = 0.5;
    auto scaled = scale_about(cp, gamma);
    std::mt19937 gen(77);
    std::uniform_real_distribution<double> ud(-2.0, 2.0);
    for (int i = 0; i < 10000; ++i) {
        VectorXd s(2);
        s << ud(gen), ud(gen);
        VectorXd mapped = xc + gamma * (s - xc);
        const double lhs = (scaled.A() * mapped - scaled.b()).maxCoeff();
        const double rhs = gamma * (sq.A() * s - sq.b()).maxCoeff();
        CHECK(std::abs(lhs - rhs) <= 1e-12);
    }
}

TEST_CASE("scaled sets are nested in gamma") {
    std::mt19937 gen(91);
    auto poly = random_bounded_poly(gen, 3, 6);
    auto ball = chebyshev_center(poly);
    CenteredPolytope cp(poly, ball.center);
    auto inner = scale_about(cp, 0.4);
    auto outer = scale_about(cp, 0.9);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
        VectorXd s(3);
        s << ud(gen), ud(gen), ud(gen);
        if (inner.contains(s, 1e-12)) CHECK(outer.contains(s, 1e-9));
    }
    CHECK_THROWS_AS(scale_about(cp, -0.1), std::invalid_argument);
}

TEST_CASE("strictly interior center is enforced") {
    auto sq = unit_square();
    VectorXd boundary(2);
    boundary << 1.0, 0.0;
    CHECK_THROWS_AS(CenteredPolytope(sq, boundary), std::invalid_argument);
    VectorXd inside(2);
    inside << 0.9, -0.3;
    CHECK_NOTHROW(CenteredPolytope(sq, inside));
}

TEST_CASE("monte carlo volume of the unit square") {
    auto sq = unit_square();
    VectorXd lo = VectorXd::Constant(2, -2.0);
    VectorXd hi = VectorXd::Constant(2, 2.0);
    auto est = mc_volume([&](const VectorXd& p) { return sq.contains(p); }, lo, hi, 100000,
                         SampleStream{9, 0});
    CHECK(std::abs(est.volume - 4.0) <= 3.0 * est.std_error);

    // Determinism: identical stream reproduces the estimate bit-for-bit.
    auto est2 = mc_volume([&](const VectorXd& p) { return sq.contains(p); }, lo, hi, 100000,
                          SampleStream{9, 0});
    CHECK(est.volume == est2.volume);
    CHECK(est.hits == est2.hits);
}

TEST_CASE("monte carlo volume: empty set and cross-polytope") {
    VectorXd lo = VectorXd::Constant(3, -2.0);
    VectorXd hi = VectorXd::Constant(3, 2.0);
    auto none = mc_volume([](const VectorXd&) { return false; }, lo, hi, 1000, SampleStream{1, 1});
    CHECK(none.volume == 0.0);

    // Unit l1 ball in 3D has volume 2^3 / 3! = 4/3.
    auto est = mc_volume([](const VectorXd& p) { return p.lpNorm<1>() <= 1.0; }, lo, hi, 200000,
                         SampleStream{2, 5});
    CHECK(std::abs(est.volume - 8.0 / 6.0) <= 3.0 * est.std_error);

    CHECK_THROWS_AS(
        mc_volume([](const VectorXd&) { return true; }, lo, hi, 50, SampleStream{0, 0}),
        std::invalid_argument);
}

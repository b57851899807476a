#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <psmpc/errors.hpp>
#include <psmpc/sas.hpp>
#include <random>

#include "oracles.hpp"

using namespace psmpc::sas;
using psmpc::uncertainty::DistributionSpec;
using psmpc::uncertainty::GaussianBlock;
using psmpc::uncertainty::SampleStream;
using psmpc::uncertainty::ScalarFactorBlock;
using psmpc::uncertainty::UncertainConstraintSystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_spd(std::mt19937& gen, int n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
    return A.transpose() * A + 0.3 * MatrixXd::Identity(n, n);
}

psmpc::polytope::HPolytope box_poly(const VectorXd& lo, const VectorXd& hi) {
    const int n = static_cast<int>(lo.size());
    MatrixXd A = MatrixXd::Zero(2 * n, n);
    VectorXd b(2 * n);
    for (int j = 0; j < n; ++j) {
        A(2 * j, j) = 1.0;
        b(2 * j) = hi(j);
        A(2 * j + 1, j) = -1.0;
        b(2 * j + 1) = -lo(j);
    }
    return psmpc::polytope::HPolytope(A, b);
}

}  // namespace

TEST_CASE("support function closed forms") {
    VectorXd zero2 = VectorXd::Zero(2);
    VectorXd f(2);
    f << 1, 1;
    NormSAS cube(zero2, MatrixXd::Identity(2, 2), NormOrder::Linf);
    CHECK(sas_support(cube, f) == doctest::Approx(2.0));
    NormSAS cross(zero2, MatrixXd::Identity(2, 2), NormOrder::L1);
    CHECK(sas_support(cross, f) == doctest::Approx(1.0));

    VectorXd xc(2);
    xc << 1, 0;
    MatrixXd P = VectorXd((VectorXd(2) << 2, 3).finished()).asDiagonal();
    NormSAS s(xc, P, NormOrder::L1);
    VectorXd g(2);
    g << 1, -1;
    CHECK(sas_support(s, g) == doctest::Approx(4.0));
}

TEST_CASE("vertex maps") {
    VectorXd zero2 = VectorXd::Zero(2);
    NormSAS cross(zero2, MatrixXd::Identity(2, 2), NormOrder::L1);
    auto v1 = sas_vertices(cross);
    REQUIRE(v1.size() == 4);
    for (const auto& v : v1) CHECK(v.lpNorm<1>() == doctest::Approx(1.0));

    VectorXd ones2 = VectorXd::Ones(2);
    NormSAS cube(ones2, MatrixXd::Identity(2, 2), NormOrder::Linf);
    auto v2 = sas_vertices(cube);
    REQUIRE(v2.size() == 4);
    for (const auto& v : v2) {
        CHECK((v(0) == doctest::Approx(0.0) || v(0) == doctest::Approx(2.0)));
        CHECK((v(1) == doctest::Approx(0.0) || v(1) == doctest::Approx(2.0)));
    }

    NormSAS big(VectorXd::Zero(21), MatrixXd::Identity(21, 21), NormOrder::Linf);
    CHECK_THROWS_AS(sas_vertices(big), std::invalid_argument);
}

TEST_CASE("support equals the vertex maximum") {
    std::mt19937 gen(11);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3;
        MatrixXd P = random_spd(gen, n);
        VectorXd xc(n), f(n);
        for (int j = 0; j < n; ++j) {
            xc(j) = nd(gen);
            f(j) = nd(gen);
        }
        for (NormOrder order : {NormOrder::L1, NormOrder::Linf}) {
            NormSAS s(xc, P, order);
            double best = -1e300;
            for (const auto& v : sas_vertices(s)) best = std::max(best, f.dot(v));
            CHECK(sas_support(s, f) ==
                  doctest::Approx(best).epsilon(1e-9).scale(1.0 + std::abs(best)));
        }
    }
}

TEST_CASE("membership basics and boundary slack") {
    VectorXd zero2 = VectorXd::Zero(2);
    NormSAS cross(zero2, MatrixXd::Identity(2, 2), NormOrder::L1);
    CHECK(sas_membership(cross, zero2));
    VectorXd just_out(2);
    just_out << 1.0, 1e-8;
    CHECK_FALSE(sas_membership(cross, just_out));
    VectorXd within_slack(2);
    within_slack << 1.0, 1e-10;
    CHECK(sas_membership(cross, within_slack));

    NormSAS degenerate(zero2, MatrixXd::Zero(2, 2), NormOrder::L1);
    CHECK_THROWS_AS(sas_membership(degenerate, zero2), psmpc::SingularShapeError);
}

TEST_CASE("membership agrees with the lifted l1 description") {
    std::mt19937 gen(21);
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd P = random_spd(gen, 3);
    VectorXd xc(3);
    xc << 0.2, -0.5, 0.1;
    NormSAS s(xc, P, NormOrder::L1);
    auto rep = lift_l1(s);
    REQUIRE(rep.count() == 10);
    auto lifted = rep.lifted_polytope();
    REQUIRE(lifted.rows() == 10);
    REQUIRE(lifted.dimension() == 6);

    int tested = 0;
    for (int i = 0; i < 10000; ++i) {
        VectorXd xi(3);
        for (int j = 0; j < 3; ++j) xi(j) = 4.0 * nd(gen);
        const VectorXd resid = rep.M * xi - rep.c;
        const double n1 = resid.lpNorm<1>();
        if (std::abs(n1 - 1.0) <= 1e-8) continue;  // skip razor-thin boundary
        // The analytic slack choice zeta_i = |m_i' xi - c_i| witnesses
        // feasibility of the lifted system exactly when ||M xi - c||_1 <= 1.
        VectorXd point(6);
        point.head(3) = xi;
        point.tail(3) = resid.cwiseAbs();
        CHECK(sas_membership(s, xi) == (n1 <= 1.0));
        CHECK(lifted.contains(point, 1e-9) == (n1 <= 1.0));
        ++tested;
    }
    CHECK(tested > 9000);
}

TEST_CASE("lift of the identity set and of a scaled set") {
    VectorXd zero2 = VectorXd::Zero(2);
    NormSAS unit(zero2, MatrixXd::Identity(2, 2), NormOrder::L1);
    auto rep = lift_l1(unit);
    CHECK(rep.count() == 7);
    CHECK((rep.M - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(rep.c.cwiseAbs().maxCoeff() <= 1e-12);

    std::mt19937 gen(5);
    MatrixXd P = random_spd(gen, 2);
    VectorXd xc(2);
    xc << 0.4, -0.1;
    NormSAS s(xc, P, NormOrder::L1);
    auto base = lift_l1(s);
    const double gamma = 0.37;
    auto shrunk = lift_l1(scaled(s, gamma));
    CHECK((shrunk.M - base.M / gamma).cwiseAbs().maxCoeff() <=
          1e-9 * base.M.cwiseAbs().maxCoeff() / gamma);
    CHECK((shrunk.c - base.c / gamma).cwiseAbs().maxCoeff() <=
          1e-9 * (1.0 + base.c.cwiseAbs().maxCoeff()) / gamma);

    CHECK_THROWS_AS(lift_l1(NormSAS(zero2, MatrixXd::Identity(2, 2), NormOrder::Linf)),
                    std::invalid_argument);
}

TEST_CASE("linf H-representation") {
    VectorXd zero3 = VectorXd::Zero(3);
    NormSAS cube(zero3, MatrixXd::Identity(3, 3), NormOrder::Linf);
    auto hp = hrep_linf(cube);
    CHECK(hp.rows() == 6);
    CHECK(hp.contains(VectorXd::Ones(3), 1e-12));
    CHECK_FALSE(hp.contains(VectorXd::Constant(3, 1.01)));

    std::mt19937 gen(303);
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd P = random_spd(gen, 3);
    VectorXd xc(3);
    xc << -0.3, 0.8, 0.0;
    NormSAS s(xc, P, NormOrder::Linf);
    auto hs = hrep_linf(s);
    CHECK(hs.rows() == 6);
    const MatrixXd M = P.inverse();
    int tested = 0;
    for (int i = 0; i < 10000; ++i) {
        VectorXd xi(3);
        for (int j = 0; j < 3; ++j) xi(j) = xc(j) + 5.0 * nd(gen);
        const double ninf = (M * (xi - xc)).lpNorm<Eigen::Infinity>();
        if (std::abs(ninf - 1.0) <= 1e-8) continue;
        CHECK(hs.contains(xi, 1e-9) == (ninf <= 1.0));
        CHECK(sas_membership(s, xi) == (ninf <= 1.0));
        ++tested;
    }
    CHECK(tested > 9000);

    CHECK_THROWS_AS(hrep_linf(NormSAS(zero3, MatrixXd::Identity(3, 3), NormOrder::L1)),
                    std::invalid_argument);
}

TEST_CASE("sampled-poly design: duplicates, boundedness, infeasibility") {
    // Zero-variance uncertainty: every scenario identical.
    VectorXd fixed(1);
    fixed << 1.0;
    DistributionSpec const_spec({psmpc::uncertainty::UniformBoxBlock{fixed, fixed}});
    MatrixXd F0(2, 2);
    F0 << 1, 0, -1, 0;
    auto sys = UncertainConstraintSystem::affine(
        F0, {MatrixXd::Zero(2, 2)}, VectorXd::Ones(2), {VectorXd::Zero(2)});
    auto scen = psmpc::uncertainty::realize_scenarios(sys, const_spec, SampleStream{3, 0}, 10);
    // |x1| <= 1 alone is unbounded in x2; add the operating box.
    auto sampled = design_sampled_poly(scen, 10.0);
    CHECK(sampled.scenario_count == 10);
    CHECK(sampled.rows_per_scenario == 2);
    CHECK(sampled.scenario_rows == 20);
    CHECK(sampled.poly.poly().rows() == 24);  // 20 scenario rows + 4 box rows
    CHECK((sampled.poly.poly().b() - sampled.poly.poly().A() * sampled.poly.center()).minCoeff() >
          1e-9);

    // Random scaled-direction system in 3D, boxed: bounded with interior center.
    DistributionSpec q_spec({ScalarFactorBlock{0.5, 1.5},
                             GaussianBlock{VectorXd::Zero(3), MatrixXd::Identity(3, 3)}});
    auto dir_sys = UncertainConstraintSystem::scaled_direction(3, 1.0);
    auto dir_scen = psmpc::uncertainty::realize_scenarios(dir_sys, q_spec, SampleStream{17, 4}, 10);
    auto dir_sampled = design_sampled_poly(dir_scen, 10.0);
    CHECK(dir_sampled.scenario_rows == 10);
    CHECK(dir_sampled.poly.poly().contains(dir_sampled.poly.center(), -1e-9));

    // Contradictory fixed scenarios: x1 <= -1 and -x1 <= -1.
    MatrixXd Fc(2, 2);
    Fc << 1, 0, -1, 0;
    auto bad_sys = UncertainConstraintSystem::affine(
        Fc, {MatrixXd::Zero(2, 2)}, VectorXd::Constant(2, -1.0), {VectorXd::Zero(2)});
    auto bad_scen = psmpc::uncertainty::realize_scenarios(bad_sys, const_spec, SampleStream{0, 0}, 3);
    CHECK_THROWS_AS(design_sampled_poly(bad_scen, 10.0), psmpc::EmptySetError);
}

TEST_CASE("norm-ball design on boxes") {
    VectorXd lo(2), hi(2);
    lo << -1, -1;
    hi << 1, 1;
    auto sym = design_norm_sas(box_poly(lo, hi), NormOrder::L1);
    CHECK(sym.center().lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK((sym.shape() - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-7);

    lo << 0, 0;
    hi << 2, 4;
    auto rect = design_norm_sas(box_poly(lo, hi), NormOrder::Linf);
    CHECK(rect.center()(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(rect.center()(1) == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(rect.shape()(0, 0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(rect.shape()(1, 1) == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(rect.shape()(0, 1) == 0.0);

    MatrixXd Ah(1, 2);
    Ah << 1, 0;
    CHECK_THROWS_AS(design_norm_sas(psmpc::polytope::HPolytope(Ah, VectorXd::Ones(1)),
                                    NormOrder::L1),
                    psmpc::UnboundedSetError);
    CHECK_THROWS_AS(design_norm_sas(box_poly(lo, hi), NormOrder::L1, ShapeMode::FullShape),
                    psmpc::NotSupportedError);
}

TEST_CASE("designed sets are contained and shrink with D") {
    std::mt19937 gen(606);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 15; ++trial) {
        const int n = 3;
        MatrixXd A(2 * n + 6, n);
        VectorXd b(2 * n + 6);
        A.topRows(2 * n).setZero();
        for (int j = 0; j < n; ++j) {
            A(2 * j, j) = 1.0;
            b(2 * j) = 2.0;
            A(2 * j + 1, j) = -1.0;
            b(2 * j + 1) = 2.0;
        }
        for (int i = 2 * n; i < 2 * n + 6; ++i) {
            for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
            b(i) = std::abs(nd(gen)) + 0.5;
        }
        psmpc::polytope::HPolytope D(A, b);
        const NormOrder order = trial % 2 == 0 ? NormOrder::L1 : NormOrder::Linf;
        auto s = design_norm_sas(D, order);

        // Row-wise containment certificate.
        for (int i = 0; i < D.rows(); ++i) {
            const VectorXd f = D.A().row(i).transpose();
            CHECK(sas_support(s, f) <= D.b()(i) + 1e-8 * (1.0 + std::abs(D.b()(i))));
        }

        // Cut D through the middle and re-design: the trace cannot grow.
        auto ball = psmpc::polytope::chebyshev_center(D);
        VectorXd f(n);
        for (int j = 0; j < n; ++j) f(j) = nd(gen);
        if (f.norm() < 1e-6) continue;
        MatrixXd A2(A.rows() + 1, n);
        A2 << A, f.transpose();
        VectorXd b2(b.size() + 1);
        b2 << b, f.dot(ball.center) + 0.5 * ball.radius * f.norm();
        auto s2 = design_norm_sas(psmpc::polytope::HPolytope(A2, b2), order);
        CHECK(s2.shape().trace() <= s.shape().trace() + 1e-6 * (1.0 + s.shape().trace()));
    }
}

TEST_CASE("design is deterministic") {
    VectorXd lo = VectorXd::Constant(3, -1.5);
    VectorXd hi = VectorXd::Constant(3, 2.5);
    auto a = design_norm_sas(box_poly(lo, hi), NormOrder::L1);
    auto b = design_norm_sas(box_poly(lo, hi), NormOrder::L1);
    CHECK(a.center() == b.center());
    CHECK(a.shape() == b.shape());
}

TEST_CASE("shape matrix validation") {
    VectorXd zero2 = VectorXd::Zero(2);
    MatrixXd asym(2, 2);
    asym << 1, 0.5, 0.1, 1;
    CHECK_THROWS_AS(NormSAS(zero2, asym, NormOrder::L1), std::invalid_argument);
    MatrixXd indef(2, 2);
    indef << 0, 1, 1, 0;
    CHECK_THROWS_AS(NormSAS(zero2, indef, NormOrder::L1), std::invalid_argument);
    CHECK_THROWS_AS(scaled(NormSAS(zero2, MatrixXd::Identity(2, 2), NormOrder::L1), -1.0),
                    std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <psmpc/optim.hpp>
#include <random>

#include "oracles.hpp"

using namespace psmpc::optim;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LinearProgram box_lp(const VectorXd& c, bool maximize, const MatrixXd& A,
                     const VectorXd& b) {
    LinearProgram lp;
    lp.c = c;
    lp.maximize = maximize;
    lp.A = A;
    lp.b = b;
    return lp;
}

}  // namespace

TEST_CASE("lp: one-dimensional interval") {
    MatrixXd A(2, 1);
    A << 1, -1;
    VectorXd b(2);
    b << 1, 1;
    VectorXd c(1);
    c << 1;
    auto res = solve_lp(box_lp(c, true, A, b));
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-9));

    auto res_min = solve_lp(box_lp(c, false, A, b));
    REQUIRE(res_min.status == SolveStatus::Optimal);
    CHECK(res_min.x(0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("lp: unbounded direction detected") {
    MatrixXd A(1, 2);
    A << 1, 0;
    VectorXd b(1);
    b << 1;
    VectorXd c(2);
    c << 0, 1;
    auto res = solve_lp(box_lp(c, true, A, b));
    CHECK(res.status == SolveStatus::Unbounded);
}

TEST_CASE("lp: infeasible system detected") {
    MatrixXd A(2, 1);
    A << 1, -1;
    VectorXd b(2);
    b << -1, -2;  // x <= -1 and x >= 2
    VectorXd c(1);
    c << 1;
    auto res = solve_lp(box_lp(c, false, A, b));
    CHECK(res.status == SolveStatus::Infeasible);
}

TEST_CASE("lp: variable bounds participate") {
    LinearProgram lp;
    lp.c = VectorXd::Ones(2);
    lp.maximize = false;
    lp.A = MatrixXd::Zero(0, 2);
    lp.b = VectorXd::Zero(0);
    lp.lower = VectorXd(2);
    lp.lower << -2, -3;
    auto res = solve_lp(lp);
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.objective == doctest::Approx(-5.0).epsilon(1e-9));
    CHECK(res.x(0) == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(res.x(1) == doctest::Approx(-3.0).epsilon(1e-9));

    lp.maximize = true;
    lp.upper = VectorXd(2);
    lp.upper << 4, 5;
    auto res_up = solve_lp(lp);
    REQUIRE(res_up.status == SolveStatus::Optimal);
    CHECK(res_up.objective == doctest::Approx(9.0).epsilon(1e-9));
}

TEST_CASE("lp: degenerate duplicated rows still solve") {
    MatrixXd A(6, 2);
    A << 1, 0, 1, 0, 0, 1, 0, 1, -1, 0, 0, -1;
    VectorXd b(6);
    b << 1, 1, 2, 2, 0, 0;
    VectorXd c(2);
    c << 1, 1;
    auto res = solve_lp(box_lp(c, true, A, b));
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.objective == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("lp: random bounded instances match vertex enumeration") {
    std::mt19937 gen(12345);
    std::normal_distribution<double> nd(0.0, 1.0);
    int solved = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const int n = 3;
        const int extra = 8;
        MatrixXd A(extra + 2 * n, n);
        VectorXd b(extra + 2 * n);
        for (int i = 0; i < extra; ++i) {
            for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
            b(i) = std::abs(nd(gen)) + 0.1;
        }
        // Bounding box keeps every instance bounded and feasible at 0.
        for (int j = 0; j < n; ++j) {
            A.row(extra + 2 * j).setZero();
            A(extra + 2 * j, j) = 1.0;
            b(extra + 2 * j) = 5.0;
            A.row(extra + 2 * j + 1).setZero();
            A(extra + 2 * j + 1, j) = -1.0;
            b(extra + 2 * j + 1) = 5.0;
        }
        VectorXd c(n);
        for (int j = 0; j < n; ++j) c(j) = nd(gen);
        bool maximize = trial % 2 == 0;

        auto res = solve_lp(box_lp(c, maximize, A, b));
        REQUIRE(res.status == SolveStatus::Optimal);
        auto ref = oracle::lp_by_vertex_enumeration(c, maximize, A, b);
        REQUIRE(ref.has_value());
        CHECK(res.objective ==
              doctest::Approx(ref->objective).epsilon(1e-7).scale(1.0 + std::abs(ref->objective)));
        CHECK((A * res.x - b).maxCoeff() <= 1e-7 * (1.0 + b.cwiseAbs().maxCoeff()));
        ++solved;
    }
    CHECK(solved == 120);
}

TEST_CASE("lp: dual certificate on random minimed instances") {
    std::mt19937 gen(777);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 4;
        MatrixXd A(2 * n + 6, n);
        VectorXd b(2 * n + 6);
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
            b(i) = std::abs(nd(gen)) + 0.2;
        }
        for (int j = 0; j < n; ++j) {
            A.row(6 + 2 * j).setZero();
            A(6 + 2 * j, j) = 1.0;
            b(6 + 2 * j) = 3.0;
            A.row(6 + 2 * j + 1).setZero();
            A(6 + 2 * j + 1, j) = -1.0;
            b(6 + 2 * j + 1) = 3.0;
        }
        VectorXd c(n);
        for (int j = 0; j < n; ++j) c(j) = nd(gen);

        auto res = solve_lp(box_lp(c, false, A, b));
        REQUIRE(res.status == SolveStatus::Optimal);
        const VectorXd& y = res.dual;
        REQUIRE(y.size() == A.rows());
        CHECK(y.minCoeff() >= -1e-9);
        // Stationarity of the Lagrangian: c + A'y = 0 for a minimization.
        CHECK((c + A.transpose() * y).lpNorm<Eigen::Infinity>() <=
              1e-6 * (1.0 + c.lpNorm<Eigen::Infinity>()));
        // Strong duality: c'x = -b'y.
        CHECK(std::abs(res.objective + b.dot(y)) <= 1e-6 * (1.0 + std::abs(res.objective)));
    }
}

TEST_CASE("lp: row scaling leaves the optimum unchanged") {
    std::mt19937 gen(99);
    std::normal_distribution<double> nd(0.0, 1.0);
    const int n = 3;
    MatrixXd A(2 * n + 5, n);
    VectorXd b(2 * n + 5);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
        b(i) = std::abs(nd(gen)) + 0.3;
    }
    for (int j = 0; j < n; ++j) {
        A.row(5 + 2 * j).setZero();
        A(5 + 2 * j, j) = 1.0;
        b(5 + 2 * j) = 4.0;
        A.row(5 + 2 * j + 1).setZero();
        A(5 + 2 * j + 1, j) = -1.0;
        b(5 + 2 * j + 1) = 4.0;
    }
    VectorXd c(n);
    c << 1.0, -2.0, 0.5;
    auto base = solve_lp(box_lp(c, false, A, b));
    REQUIRE(base.status == SolveStatus::Optimal);

    MatrixXd As = A;
    VectorXd bs = b;
    std::uniform_real_distribution<double> ud(0.5, 20.0);
    for (int i = 0; i < A.rows(); ++i) {
        double s = ud(gen);
        As.row(i) *= s;
        bs(i) *= s;
    }
    auto scaled = solve_lp(box_lp(c, false, As, bs));
    REQUIRE(scaled.status == SolveStatus::Optimal);
    CHECK(scaled.objective ==
          doctest::Approx(base.objective).epsilon(1e-7).scale(1.0 + std::abs(base.objective)));
}

TEST_CASE("lp: deterministic across repeated solves") {
    MatrixXd A(4, 2);
    A << 1, 1, -1, 0, 0, -1, 1, -1;
    VectorXd b(4);
    b << 2, 0, 0, 1;
    VectorXd c(2);
    c << -1, -0.5;
    auto r1 = solve_lp(box_lp(c, false, A, b));
    auto r2 = solve_lp(box_lp(c, false, A, b));
    REQUIRE(r1.status == SolveStatus::Optimal);
    REQUIRE(r2.status == SolveStatus::Optimal);
    CHECK(r1.x == r2.x);
    CHECK(r1.objective == r2.objective);
}

TEST_CASE("lp: dimension mismatches throw") {
    LinearProgram lp;
    lp.c = VectorXd::Ones(2);
    lp.A = MatrixXd::Zero(3, 3);
    lp.b = VectorXd::Zero(3);
    CHECK_THROWS_AS(solve_lp(lp), std::invalid_argument);
}

TEST_CASE("qp: projection onto a halfspace") {
    QuadraticProgram qp;
    qp.H = 2.0 * MatrixXd::Identity(3, 3);
    qp.f = VectorXd::Zero(3);
    qp.A = MatrixXd(1, 3);
    qp.A << -1, 0, 0;
    qp.b = VectorXd(1);
    qp.b << -1;  // x1 >= 1
    auto res = solve_qp(qp);
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.x(1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("qp: unconstrained strictly convex minimum") {
    std::mt19937 gen(4);
    std::normal_distribution<double> nd(0.0, 1.0);
    const int n = 5;
    MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = nd(gen);
    QuadraticProgram qp;
    qp.H = M.transpose() * M + MatrixXd::Identity(n, n);
    qp.f = VectorXd::Ones(n);
    qp.A = MatrixXd::Zero(0, n);
    qp.b = VectorXd::Zero(0);
    auto res = solve_qp(qp);
    REQUIRE(res.status == SolveStatus::Optimal);
    VectorXd expect = qp.H.ldlt().solve(-qp.f);
    CHECK((res.x - expect).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + expect.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("qp: singular curvature cases") {
    QuadraticProgram qp;
    qp.H = MatrixXd::Zero(2, 2);
    qp.H(0, 0) = 1.0;
    qp.f = VectorXd(2);
    qp.f << 0, -1;  // objective decreases without bound along x2

    SUBCASE("unbounded when the flat direction is unconstrained") {
        qp.A = MatrixXd::Zero(0, 2);
        qp.b = VectorXd::Zero(0);
        auto res = solve_qp(qp);
        CHECK(res.status == SolveStatus::Unbounded);
    }
    SUBCASE("optimal when a constraint blocks the flat direction") {
        qp.A = MatrixXd(1, 2);
        qp.A << 0, 1;
        qp.b = VectorXd(1);
        qp.b << 3;
        auto res = solve_qp(qp);
        REQUIRE(res.status == SolveStatus::Optimal);
        CHECK(res.x(1) == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(res.objective == doctest::Approx(-3.0).epsilon(1e-9));
    }
}

TEST_CASE("qp: infeasible constraints detected") {
    QuadraticProgram qp;
    qp.H = MatrixXd::Identity(1, 1);
    qp.f = VectorXd::Zero(1);
    qp.A = MatrixXd(2, 1);
    qp.A << 1, -1;
    qp.b = VectorXd(2);
    qp.b << -1, -2;
    auto res = solve_qp(qp);
    CHECK(res.status == SolveStatus::Infeasible);
}

TEST_CASE("qp: random strictly convex instances match enumeration") {
    std::mt19937 gen(2024);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 4;
        const int m = 6;
        MatrixXd M(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) M(i, j) = nd(gen);
        QuadraticProgram qp;
        qp.H = M.transpose() * M + 0.5 * MatrixXd::Identity(n, n);
        qp.f = VectorXd(n);
        for (int j = 0; j < n; ++j) qp.f(j) = nd(gen);
        qp.A = MatrixXd(m, n);
        qp.b = VectorXd(m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) qp.A(i, j) = nd(gen);
            qp.b(i) = std::abs(nd(gen)) + 0.1;  // keeps 0 feasible
        }
        auto res = solve_qp(qp);
        REQUIRE(res.status == SolveStatus::Optimal);
        auto ref = oracle::qp_by_active_set_enumeration(qp.H, qp.f, qp.A, qp.b);
        REQUIRE(ref.has_value());
        CHECK(res.objective == doctest::Approx(*ref).epsilon(1e-6).scale(1.0 + std::abs(*ref)));
        CHECK((qp.A * res.x - qp.b).maxCoeff() <= 1e-7 * (1.0 + qp.b.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("qp: positive semidefinite rank-deficient instances") {
    std::mt19937 gen(31);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 4;
        MatrixXd M(2, n);  // rank-2 Hessian
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < n; ++j) M(i, j) = nd(gen);
        QuadraticProgram qp;
        qp.H = M.transpose() * M;
        qp.f = VectorXd(n);
        for (int j = 0; j < n; ++j) qp.f(j) = nd(gen);
        // Box constraints make the problem bounded regardless of the nullspace.
        qp.A = MatrixXd(2 * n, n);
        qp.b = VectorXd::Constant(2 * n, 2.0);
        qp.A.setZero();
        for (int j = 0; j < n; ++j) {
            qp.A(2 * j, j) = 1.0;
            qp.A(2 * j + 1, j) = -1.0;
        }
        auto res = solve_qp(qp);
        REQUIRE(res.status == SolveStatus::Optimal);
        auto ref = oracle::qp_by_active_set_enumeration(qp.H, qp.f, qp.A, qp.b);
        REQUIRE(ref.has_value());
        CHECK(res.objective == doctest::Approx(*ref).epsilon(1e-6).scale(1.0 + std::abs(*ref)));
    }
}

TEST_CASE("qp: invalid Hessians throw") {
    QuadraticProgram qp;
    qp.f = VectorXd::Zero(2);
    qp.A = MatrixXd::Zero(0, 2);
    qp.b = VectorXd::Zero(0);

    SUBCASE("asymmetric") {
        qp.H = MatrixXd(2, 2);
        qp.H << 1, 0.5, 0.2, 1;
        CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
    }
    SUBCASE("indefinite") {
        qp.H = MatrixXd(2, 2);
        qp.H << 0, 1, 1, 0;
        CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
    }
}

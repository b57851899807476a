// Microbenchmarks for the hot paths: dense LP/QP solves, per-scenario scaling
// factors, and the online MPC step with the offline-sampling constraint set
// versus the probabilistically scaled one.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <random>

#include "psmpc/optim.hpp"
#include "psmpc/sas.hpp"
#include "psmpc/scaling.hpp"
#include "psmpc/smpc.hpp"
#include "psmpc/uncertainty.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace psmpc;

namespace {

struct LpFixture {
    MatrixXd A;
    VectorXd b, c;
};

LpFixture make_lp(int rows, int cols) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LpFixture f;
    f.A.resize(rows + 2 * cols, cols);
    f.b.resize(rows + 2 * cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) f.A(i, j) = gauss(rng);
        f.b(i) = 1.0 + std::abs(gauss(rng));
    }
    // Box rows keep the feasible set bounded.
    for (int j = 0; j < cols; ++j) {
        f.A.row(rows + 2 * j).setZero();
        f.A(rows + 2 * j, j) = 1.0;
        f.b(rows + 2 * j) = 10.0;
        f.A.row(rows + 2 * j + 1).setZero();
        f.A(rows + 2 * j + 1, j) = -1.0;
        f.b(rows + 2 * j + 1) = 10.0;
    }
    f.c.resize(cols);
    for (int j = 0; j < cols; ++j) f.c(j) = gauss(rng);
    return f;
}

void BM_SolveLp(benchmark::State& state) {
    const auto f = make_lp(static_cast<int>(state.range(0)), 10);
    optim::LinearProgram lp;
    lp.c = f.c;
    lp.A = f.A;
    lp.b = f.b;
    for (auto _ : state) {
        auto result = optim::solve_lp(lp);
        benchmark::DoNotOptimize(result);
    }
}

void BM_SolveQp(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    const auto f = make_lp(rows, 10);
    optim::QuadraticProgram qp;
    qp.H = MatrixXd::Identity(10, 10) * 2.0;
    qp.f = f.c;
    qp.A = f.A;
    qp.b = f.b;
    for (auto _ : state) {
        auto result = optim::solve_qp(qp);
        benchmark::DoNotOptimize(result);
    }
}

const uncertainty::DistributionSpec& direction_distribution() {
    static const uncertainty::DistributionSpec dist(
        {uncertainty::ScalarFactorBlock{0.5, 1.5},
         uncertainty::GaussianBlock{VectorXd::Zero(3), MatrixXd::Identity(3, 3)}});
    return dist;
}

void BM_GammaNormBall(benchmark::State& state) {
    const auto sys = uncertainty::UncertainConstraintSystem::scaled_direction(3, 1.0);
    const auto& dist = direction_distribution();
    const auto design =
        uncertainty::realize_scenarios(sys, dist, uncertainty::SampleStream{1, 2}, 100);
    const auto candidate =
        sas::design_norm_sas(sas::stacked_design_polytope(design, 10.0), sas::NormOrder::L1);
    const auto scen = design.scenarios.front();
    for (auto _ : state) {
        const double g = scaling::gamma_for_scenario(candidate, scen);
        benchmark::DoNotOptimize(g);
    }
}

void BM_GammaSampledPoly(benchmark::State& state) {
    const auto sys = uncertainty::UncertainConstraintSystem::scaled_direction(3, 1.0);
    const auto& dist = direction_distribution();
    const auto design = uncertainty::realize_scenarios(
        sys, dist, uncertainty::SampleStream{1, 2}, static_cast<int>(state.range(0)));
    const auto candidate = sas::design_sampled_poly(design, 10.0);
    const auto scen = design.scenarios.front();
    for (auto _ : state) {
        const double g = scaling::gamma_for_scenario(candidate, scen);
        benchmark::DoNotOptimize(g);
    }
}

void BM_ScalePipelineL1(benchmark::State& state) {
    const auto sys = uncertainty::UncertainConstraintSystem::scaled_direction(3, 1.0);
    const auto& dist = direction_distribution();
    const scaling::ScalingConfig cfg{0.05, 1e-6, scaling::ConstantMode::Exact, 1};
    for (auto _ : state) {
        const auto design =
            uncertainty::realize_scenarios(sys, dist, uncertainty::SampleStream{1, 2}, 100);
        const auto candidate = sas::design_norm_sas(sas::stacked_design_polytope(design, 10.0),
                                                    sas::NormOrder::L1);
        auto scaled = scaling::probabilistic_scale(candidate, sys, dist, cfg);
        benchmark::DoNotOptimize(scaled);
    }
}

struct StepFixture {
    smpc::SmpcProblem prob;
    MatrixXd S_tilde;
    smpc::OnlineConstraints oc;
    VectorXd x;
};

const StepFixture& os_fixture() {
    static const StepFixture f = [] {
        auto prob = smpc::make_benchmark_problem(2, 1, 8, 0.1, 1e-3);
        const uncertainty::SampleStream base{0, 0};
        auto S = smpc::estimate_cost_matrix(prob, 1000, base.substream(10));
        auto cm = smpc::build_os_constraints(prob, base.substream(20));
        auto oc = smpc::make_online(cm, prob);
        VectorXd x(2);
        x << 1.0, 0.0;
        return StepFixture{std::move(prob), std::move(S), std::move(oc), std::move(x)};
    }();
    return f;
}

const StepFixture& ps_fixture() {
    static const StepFixture f = [] {
        auto prob = smpc::make_benchmark_problem(2, 1, 8, 0.1, 1e-3);
        const uncertainty::SampleStream base{0, 0};
        auto S = smpc::estimate_cost_matrix(prob, 1000, base.substream(10));
        const scaling::ScalingConfig cfg{0.1, 1e-3, scaling::ConstantMode::Exact, 0};
        auto oc = smpc::build_ps_constraints(prob, 100, smpc::SasKind::L1, cfg, 10.0);
        VectorXd x(2);
        x << 1.0, 0.0;
        return StepFixture{std::move(prob), std::move(S), std::move(oc), std::move(x)};
    }();
    return f;
}

void BM_MpcStepOfflineSampling(benchmark::State& state) {
    const auto& f = os_fixture();
    for (auto _ : state) {
        auto step = smpc::mpc_step(f.x, f.S_tilde, f.oc, f.prob.K);
        benchmark::DoNotOptimize(step);
    }
    state.counters["rows"] = static_cast<double>(f.oc.online_count);
}

void BM_MpcStepScaledSet(benchmark::State& state) {
    const auto& f = ps_fixture();
    for (auto _ : state) {
        auto step = smpc::mpc_step(f.x, f.S_tilde, f.oc, f.prob.K);
        benchmark::DoNotOptimize(step);
    }
    state.counters["rows"] = static_cast<double>(f.oc.online_count);
}

}  // namespace

BENCHMARK(BM_SolveLp)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SolveQp)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GammaNormBall)->Unit(benchmark::kNanosecond);
BENCHMARK(BM_GammaSampledPoly)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScalePipelineL1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MpcStepOfflineSampling)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MpcStepScaledSet)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();

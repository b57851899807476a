// Offline-sampling stochastic MPC with a prestabilizing input
// parametrization u = Kx + v: uncertain linear system model, LQR gain
// synthesis, stacked prediction operators, Monte Carlo expected-cost matrix,
// scenario constraint rows over (x, v), offline (full scenario set) and
// probabilistically scaled online constraint builders, the online QP step,
// and closed-loop simulation.
#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "psmpc/optim.hpp"
#include "psmpc/scaling.hpp"
#include "psmpc/uncertainty.hpp"

namespace psmpc::smpc {

/// x+ = A(w) x + B(w) u + a(w) with affine dependence on a zero-mean
/// disturbance w: A(w) = A0 + sum_i w_i Ai, B(w) = B0 + sum_i w_i Bi,
/// a(w) = sum_i w_i ai.
class UncertainLtiSystem {
 public:
    /// Validates dimensional consistency and that the disturbance
    /// distribution has zero mean (blockwise analytic check).
    UncertainLtiSystem(Eigen::MatrixXd A0, std::vector<Eigen::MatrixXd> Ai, Eigen::MatrixXd B0,
                       std::vector<Eigen::MatrixXd> Bi, std::vector<Eigen::VectorXd> ai,
                       uncertainty::DistributionSpec disturbance);

    [[nodiscard]] int n() const { return static_cast<int>(A0_.rows()); }
    [[nodiscard]] int m() const { return static_cast<int>(B0_.cols()); }
    [[nodiscard]] int n_w() const { return static_cast<int>(Ai_.size()); }
    [[nodiscard]] const Eigen::MatrixXd& A0() const { return A0_; }
    [[nodiscard]] const Eigen::MatrixXd& B0() const { return B0_; }
    [[nodiscard]] const uncertainty::DistributionSpec& disturbance() const { return disturbance_; }

    [[nodiscard]] Eigen::MatrixXd A(const Eigen::VectorXd& w) const;
    [[nodiscard]] Eigen::MatrixXd B(const Eigen::VectorXd& w) const;
    [[nodiscard]] Eigen::VectorXd a(const Eigen::VectorXd& w) const;

 private:
    Eigen::MatrixXd A0_, B0_;
    std::vector<Eigen::MatrixXd> Ai_, Bi_;
    std::vector<Eigen::VectorXd> ai_;
    uncertainty::DistributionSpec disturbance_;
};

/// Horizon-T problem data: stage weights, terminal weight, prestabilizing
/// gain, and the p chance-constraint rows Hx x + Hu u <= 1 with levels eps_j.
struct SmpcProblem {
    UncertainLtiSystem system;
    int T;
    Eigen::MatrixXd Q, R, P_terminal, K;
    Eigen::MatrixXd Hx, Hu;  // p x n, p x m
    Eigen::VectorXd eps;     // per constraint row
    double delta;

    /// Validates symmetry/positive-definiteness of Q, R, P_terminal and all
    /// dimension couplings; eps entries must lie in (0, 1).
    SmpcProblem(UncertainLtiSystem sys, int horizon, Eigen::MatrixXd Q_in, Eigen::MatrixXd R_in,
                Eigen::MatrixXd P_in, Eigen::MatrixXd K_in, Eigen::MatrixXd Hx_in,
                Eigen::MatrixXd Hu_in, Eigen::VectorXd eps_in, double delta_in);

    [[nodiscard]] int p() const { return static_cast<int>(Hx.rows()); }
    [[nodiscard]] int decision_dim() const { return system.n() + system.m() * T; }
    /// True when row j involves no state term (such rows are imposed at
    /// prediction steps 0..T-1; rows with a state part at steps 1..T).
    [[nodiscard]] bool pure_input_row(int j) const;
};

/// Stacked operators for one disturbance sequence: the predicted states under
/// u = Kx + v satisfy vec(x_{0..T}) = Phi x + Gamma v + d.
struct PredictionOperators {
    Eigen::MatrixXd Phi;    // (T+1)n x n
    Eigen::MatrixXd Gamma;  // (T+1)n x mT
    Eigen::VectorXd d;      // (T+1)n
    int n = 0, m = 0, T = 0;

    [[nodiscard]] Eigen::MatrixXd phi_block(int l) const { return Phi.middleRows(l * n, n); }
    [[nodiscard]] Eigen::MatrixXd gamma_block(int l) const { return Gamma.middleRows(l * n, n); }
    [[nodiscard]] Eigen::VectorXd d_block(int l) const { return d.segment(l * n, n); }
};

struct GainSynthesis {
    Eigen::MatrixXd K;  // u = K x stabilizes the nominal pair
    Eigen::MatrixXd P;  // stabilizing solution of the Riccati equation
};

/// Infinite-horizon LQR gain and Riccati matrix for the nominal pair,
/// computed by a structure-preserving doubling iteration; verifies the
/// Riccati residual and the closed-loop spectral radius.  Throws
/// std::invalid_argument when (A0, B0) is not stabilizable.
GainSynthesis synthesize_prestabilizer(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& B0,
                                       const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Exact stacked operators for the given disturbance sequence (length T).
PredictionOperators build_prediction(const UncertainLtiSystem& sys, const Eigen::MatrixXd& K,
                                     const std::vector<Eigen::VectorXd>& w_seq, int T);

/// Sample-average estimate of the quadratic cost matrix S in
/// J = [x; v; 1]' S [x; v; 1], over n_cost disturbance sequences.
/// Requires n_cost >= 1000 (pass the exact operators through a zero-variance
/// disturbance when a deterministic matrix is wanted).
Eigen::MatrixXd estimate_cost_matrix(const SmpcProblem& prob, int n_cost,
                                     const uncertainty::SampleStream& stream);

/// One realized scenario constraint row over [x; v].
struct ConstraintRow {
    Eigen::RowVectorXd f;  // length n + mT
    double rhs = 1.0;
    int l = 0, j = 0;
};

/// Row for constraint j at prediction step l under the given disturbance
/// sequence: f' [x; v] <= rhs encodes Hx_j' x_l + Hu_j' u_l <= 1 expanded
/// through the prediction operators (u_T = K x_T at the terminal step).
/// Steps run 1..T for rows with a state part, 0..T-1 for pure input rows.
ConstraintRow constraint_row(const SmpcProblem& prob, const std::vector<Eigen::VectorXd>& w_seq,
                             int l, int j);

struct RowProvenance {
    long long sample = 0;
    int l = 0, j = 0;
};

/// Offline scenario constraint set over (x, v).
struct ConstraintMatrix {
    Eigen::MatrixXd F;  // rows x (n + mT)
    Eigen::VectorXd g;
    std::vector<RowProvenance> provenance;
    std::vector<long long> rows_per_constraint;  // per j: N_j * T

    [[nodiscard]] long long total_rows() const { return static_cast<long long>(F.rows()); }
};

/// Full offline-sampling constraint set: for every constraint j draws
/// N_j = learning_sample_size(n + mT, eps_j, delta, 1) sequences and emits T
/// rows per sequence.  Requires every eps_j in (0, 0.14).
ConstraintMatrix build_os_constraints(const SmpcProblem& prob,
                                      const uncertainty::SampleStream& stream);

enum class SasKind { Sampled, L1, Linf };

/// Inequality system solved online at every MPC step, over the variables
/// [x; v; slack] (slack variables only for the lifted l1 representation).
struct OnlineConstraints {
    std::string kind;       // "os", "sampled", "l1", "linf"
    Eigen::MatrixXd F_x;    // rows x n
    Eigen::MatrixXd F_vz;   // rows x (mT + extra)
    Eigen::VectorXd g;
    int n = 0, m = 0, T = 0;
    int extra = 0;  // lifted slack count
    long long online_count = 0;  // = rows of the online system

    // Provenance for the scaled pipelines (NaN / empty for "os").
    double gamma = std::numeric_limits<double>::quiet_NaN();
    scaling::ScalingDiagnostics scaling_diagnostics;
    long long design_scenarios = 0;      // N_D
    long long design_rows = 0;           // scenario rows of the design set
    long long design_box_rows = 0;       // operating-box rows added
    std::vector<long long> rows_per_constraint;  // "os" only
};

/// Adapter: the offline scenario set viewed as online constraints.
OnlineConstraints make_online(const ConstraintMatrix& cm, const SmpcProblem& prob);

/// Probabilistically scaled online constraint set: draws n_design scenario
/// sequences, intersects with an operating box of the given radius on (x, v),
/// designs the requested SAS, scales it, and emits the scaled set's online
/// inequalities: 3(n+mT)+1 for L1 (lifted), 2(n+mT) for Linf, or the
/// scenario-row count for Sampled.  Failures carry a pipeline stage tag.
OnlineConstraints build_ps_constraints(const SmpcProblem& prob, int n_design, SasKind kind,
                                       const scaling::ScalingConfig& cfg,
                                       double box_radius = 10.0);

/// Distribution of the flattened disturbance sequence (the per-step blocks
/// repeated horizon times).
uncertainty::DistributionSpec sequence_distribution(const uncertainty::DistributionSpec& step,
                                                    int horizon);

/// The problem's chance constraints as an uncertain inequality family over
/// xi = [x; v] with q the flattened disturbance sequence: p * T rows per
/// realization, ordered constraint-major then step-major.
uncertainty::UncertainConstraintSystem trajectory_constraint_system(const SmpcProblem& prob);

struct MpcStepResult {
    Eigen::VectorXd v;      // length mT
    Eigen::VectorXd u0;     // first applied input, K x + v_0
    double solve_time_s = 0.0;
    optim::SolveStatus status = optim::SolveStatus::Optimal;
    bool fallback = false;  // infeasible or failed solve; v = 0 applied
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::string note;
};

/// One online step: minimizes [x; v; 1]' S [x; v; 1] over the constraints
/// substituted at x.  Non-optimal solves fall back to v = 0 (pure
/// prestabilized feedback) with the status recorded.
MpcStepResult mpc_step(const Eigen::VectorXd& x, const Eigen::MatrixXd& S_tilde,
                       const OnlineConstraints& oc, const Eigen::MatrixXd& K);

struct StepRecord {
    Eigen::VectorXd x, u, v;
    double solve_time_s = 0.0;
    bool feasible = true;
    int violated = 0;  // any constraint row Hx x + Hu u > 1 at this step
};

struct TrajectoryRecord {
    std::vector<StepRecord> steps;
    double max_solve_time_s = 0.0;
    double avg_solve_time_s = 0.0;
    long long violation_count = 0;  // over steps k >= 1
    double violation_rate = 0.0;    // violation_count / (steps - 1)
    long long fallback_count = 0;
};

/// Closed-loop simulation from x0 with disturbances drawn per step from the
/// stream.  When record_timing is false all reported solve times are zero so
/// repeated runs produce identical records.
TrajectoryRecord simulate_closed_loop(const SmpcProblem& prob, const Eigen::MatrixXd& S_tilde,
                                      const OnlineConstraints& oc, int steps,
                                      const Eigen::VectorXd& x0,
                                      const uncertainty::SampleStream& stream,
                                      bool record_timing = true);

/// Chain-of-integrators benchmark: A0 the unit upper-bidiagonal chain, B0
/// feeding the last m states, a three-component zero-mean disturbance
/// (default uniform on [-1,1]^3) entering multiplicatively (relative factors
/// kappa_a, kappa_b on A, B) and additively (kappa_w on the last state);
/// two-sided constraints |x_1| <= 5 and |u_1| <= 5 as four rows; Q = I,
/// R = I; K and the terminal weight from the nominal LQR.  A custom
/// three-dimensional zero-mean disturbance may replace the default.
SmpcProblem make_benchmark_problem(int n, int m, int T, double eps, double delta,
                                   double kappa_a = 0.02, double kappa_b = 0.02,
                                   double kappa_w = 0.05);
SmpcProblem make_benchmark_problem(int n, int m, int T, double eps, double delta, double kappa_a,
                                   double kappa_b, double kappa_w,
                                   const uncertainty::DistributionSpec& disturbance);

}  // namespace psmpc::smpc

#include "psmpc/smpc.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "psmpc/errors.hpp"

namespace psmpc::smpc {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool finite(const MatrixXd& M) { return M.allFinite(); }

void check_symmetric(const MatrixXd& M, const std::string& name) {
    require(M.rows() == M.cols(), name + " must be square");
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    require((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale, name + " must be symmetric");
}

double min_eigenvalue(const MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()),
                                               Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void check_zero_mean(const uncertainty::DistributionSpec& spec) {
    for (const auto& block : spec.blocks()) {
        bool ok = true;
        if (const auto* ub = std::get_if<uncertainty::UniformBoxBlock>(&block)) {
            for (Eigen::Index i = 0; i < ub->lower.size(); ++i) {
                const double scale =
                    std::max({1.0, std::abs(ub->lower[i]), std::abs(ub->upper[i])});
                if (std::abs(ub->lower[i] + ub->upper[i]) > 1e-12 * scale) ok = false;
            }
        } else if (const auto* gb = std::get_if<uncertainty::GaussianBlock>(&block)) {
            if (gb->mean.cwiseAbs().maxCoeff() > 1e-12) ok = false;
        } else if (const auto* sf = std::get_if<uncertainty::ScalarFactorBlock>(&block)) {
            const double scale = std::max({1.0, std::abs(sf->lo), std::abs(sf->hi)});
            if (std::abs(sf->lo + sf->hi) > 1e-12 * scale) ok = false;
        }
        if (!ok) throw std::invalid_argument("disturbance distribution must have zero mean");
    }
}

std::vector<VectorXd> split_sequence(const VectorXd& q, int n_w, int T) {
    std::vector<VectorXd> w(static_cast<std::size_t>(T));
    for (int l = 0; l < T; ++l) w[static_cast<std::size_t>(l)] = q.segment(l * n_w, n_w);
    return w;
}

const char* status_name(optim::SolveStatus s) {
    switch (s) {
        case optim::SolveStatus::Optimal: return "optimal";
        case optim::SolveStatus::Infeasible: return "infeasible";
        case optim::SolveStatus::Unbounded: return "unbounded";
        default: return "numerical-failure";
    }
}

/// Row for constraint j at step l from already-built prediction operators.
ConstraintRow row_from_ops(const SmpcProblem& prob, const PredictionOperators& ops, int l, int j) {
    const int n = prob.system.n();
    const int m = prob.system.m();
    const int T = prob.T;
    if (j < 0 || j >= prob.p()) throw std::out_of_range("constraint index out of range");
    if (l < 0 || l > T) throw std::out_of_range("prediction step out of range");
    const bool pure_input = prob.pure_input_row(j);
    if (l == 0 && !pure_input)
        throw std::invalid_argument("rows with a state part are imposed from step 1");
    if (l == T && pure_input)
        throw std::out_of_range("pure input rows are imposed up to step T-1");

    // h' x_l expands the state part plus the feedback share of the input;
    // the direct v_l share is added on its own block for l < T.
    const VectorXd h = prob.Hx.row(j).transpose() + prob.K.transpose() * prob.Hu.row(j).transpose();
    ConstraintRow row;
    row.l = l;
    row.j = j;
    row.f = RowVectorXd::Zero(n + m * T);
    row.f.head(n) = h.transpose() * ops.phi_block(l);
    row.f.segment(n, m * T) = h.transpose() * ops.gamma_block(l);
    if (l < T) row.f.segment(n + l * m, m) += prob.Hu.row(j);
    row.rhs = 1.0 - h.dot(ops.d_block(l));
    return row;
}

struct OnlineSplit {
    MatrixXd F_x, F_vz;
};

OnlineSplit split_columns(const MatrixXd& F, int n) {
    OnlineSplit s;
    s.F_x = F.leftCols(n);
    s.F_vz = F.rightCols(F.cols() - n);
    return s;
}

}  // namespace

UncertainLtiSystem::UncertainLtiSystem(MatrixXd A0, std::vector<MatrixXd> Ai, MatrixXd B0,
                                       std::vector<MatrixXd> Bi, std::vector<VectorXd> ai,
                                       uncertainty::DistributionSpec disturbance)
    : A0_(std::move(A0)),
      B0_(std::move(B0)),
      Ai_(std::move(Ai)),
      Bi_(std::move(Bi)),
      ai_(std::move(ai)),
      disturbance_(std::move(disturbance)) {
    require(A0_.rows() >= 1 && A0_.rows() == A0_.cols(), "A0 must be square and nonempty");
    require(B0_.rows() == A0_.rows() && B0_.cols() >= 1, "B0 must have n rows and m >= 1");
    require(finite(A0_) && finite(B0_), "system matrices must be finite");
    const auto nw = Ai_.size();
    require(Bi_.size() == nw && ai_.size() == nw,
            "Ai, Bi, ai must all have one entry per disturbance coordinate");
    require(static_cast<int>(nw) == disturbance_.dimension(),
            "disturbance dimension must match the number of system perturbation terms");
    for (const auto& M : Ai_)
        require(M.rows() == A0_.rows() && M.cols() == A0_.cols() && finite(M),
                "each Ai must be n x n and finite");
    for (const auto& M : Bi_)
        require(M.rows() == B0_.rows() && M.cols() == B0_.cols() && finite(M),
                "each Bi must be n x m and finite");
    for (const auto& v : ai_)
        require(v.size() == A0_.rows() && v.allFinite(), "each ai must have length n and be finite");
    check_zero_mean(disturbance_);
}

MatrixXd UncertainLtiSystem::A(const VectorXd& w) const {
    require(w.size() == n_w(), "disturbance dimension mismatch");
    MatrixXd out = A0_;
    for (std::size_t i = 0; i < Ai_.size(); ++i) out += w[static_cast<Eigen::Index>(i)] * Ai_[i];
    return out;
}

MatrixXd UncertainLtiSystem::B(const VectorXd& w) const {
    require(w.size() == n_w(), "disturbance dimension mismatch");
    MatrixXd out = B0_;
    for (std::size_t i = 0; i < Bi_.size(); ++i) out += w[static_cast<Eigen::Index>(i)] * Bi_[i];
    return out;
}

VectorXd UncertainLtiSystem::a(const VectorXd& w) const {
    require(w.size() == n_w(), "disturbance dimension mismatch");
    VectorXd out = VectorXd::Zero(n());
    for (std::size_t i = 0; i < ai_.size(); ++i) out += w[static_cast<Eigen::Index>(i)] * ai_[i];
    return out;
}

SmpcProblem::SmpcProblem(UncertainLtiSystem sys, int horizon, MatrixXd Q_in, MatrixXd R_in,
                         MatrixXd P_in, MatrixXd K_in, MatrixXd Hx_in, MatrixXd Hu_in,
                         VectorXd eps_in, double delta_in)
    : system(std::move(sys)),
      T(horizon),
      Q(std::move(Q_in)),
      R(std::move(R_in)),
      P_terminal(std::move(P_in)),
      K(std::move(K_in)),
      Hx(std::move(Hx_in)),
      Hu(std::move(Hu_in)),
      eps(std::move(eps_in)),
      delta(delta_in) {
    const int n = system.n();
    const int m = system.m();
    require(T >= 1, "horizon must be at least 1");
    check_symmetric(Q, "Q");
    check_symmetric(R, "R");
    check_symmetric(P_terminal, "P_terminal");
    require(Q.rows() == n && R.rows() == m && P_terminal.rows() == n,
            "weight dimensions must match the system");
    require(min_eigenvalue(Q) > 0 && min_eigenvalue(R) > 0 && min_eigenvalue(P_terminal) > 0,
            "Q, R, P_terminal must be positive definite");
    require(K.rows() == m && K.cols() == n && finite(K), "K must be m x n and finite");
    require(Hx.rows() >= 1 && Hx.cols() == n, "Hx must be p x n with p >= 1");
    require(Hu.rows() == Hx.rows() && Hu.cols() == m, "Hu must be p x m");
    require(finite(Hx) && finite(Hu), "constraint matrices must be finite");
    require(eps.size() == Hx.rows(), "eps must have one entry per constraint row");
    for (Eigen::Index j = 0; j < eps.size(); ++j)
        require(eps[j] > 0.0 && eps[j] < 1.0, "every eps_j must lie in (0, 1)");
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    for (Eigen::Index j = 0; j < Hx.rows(); ++j)
        require(Hx.row(j).cwiseAbs().maxCoeff() > 0 || Hu.row(j).cwiseAbs().maxCoeff() > 0,
                "constraint rows must not be identically zero");
}

bool SmpcProblem::pure_input_row(int j) const {
    if (j < 0 || j >= p()) throw std::out_of_range("constraint index out of range");
    return Hx.row(j).cwiseAbs().maxCoeff() == 0.0;
}

GainSynthesis synthesize_prestabilizer(const MatrixXd& A0, const MatrixXd& B0, const MatrixXd& Q,
                                       const MatrixXd& R) {
    const int n = static_cast<int>(A0.rows());
    require(A0.rows() == A0.cols() && n >= 1, "A0 must be square");
    require(B0.rows() == n && B0.cols() >= 1, "B0 must have n rows");
    check_symmetric(Q, "Q");
    check_symmetric(R, "R");
    require(Q.rows() == n && R.rows() == B0.cols(), "weight dimensions must match");
    require(min_eigenvalue(Q) >= -1e-10 * std::max(1.0, Q.cwiseAbs().maxCoeff()),
            "Q must be positive semidefinite");
    require(min_eigenvalue(R) > 0, "R must be positive definite");

    // Stabilizability (PBH): rank [A0 - lambda I, B0] = n at every
    // eigenvalue with |lambda| >= 1.
    {
        Eigen::EigenSolver<MatrixXd> es(A0);
        const Eigen::VectorXcd lambdas = es.eigenvalues();
        for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
            if (std::abs(lambdas[i]) < 1.0 - 1e-9) continue;
            Eigen::MatrixXcd pbh(n, n + B0.cols());
            pbh << A0.cast<std::complex<double>>() -
                       lambdas[i] * Eigen::MatrixXcd::Identity(n, n),
                B0.cast<std::complex<double>>();
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
            const auto& sv = svd.singularValues();
            if (sv[sv.size() - 1] <= 1e-10 * std::max(1.0, sv[0]))
                throw std::invalid_argument("(A0, B0) is not stabilizable");
        }
    }

    // Structure-preserving doubling iteration for
    // P = A' P A - A' P B (R + B' P B)^{-1} B' P A + Q.
    MatrixXd Ak = A0;
    MatrixXd Gk = B0 * R.llt().solve(B0.transpose());
    MatrixXd Hk = Q;
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::PartialPivLU<MatrixXd> w1(MatrixXd::Identity(n, n) + Gk * Hk);
        const Eigen::PartialPivLU<MatrixXd> w2(MatrixXd::Identity(n, n) + Hk * Gk);
        const MatrixXd A_next = Ak * w1.solve(Ak);
        const MatrixXd G_next = Gk + Ak * Gk * w2.solve(Ak.transpose());
        const MatrixXd H_next = Hk + Ak.transpose() * w2.solve(Hk * Ak);
        if (!A_next.allFinite() || !G_next.allFinite() || !H_next.allFinite()) break;
        const double change = (H_next - Hk).cwiseAbs().maxCoeff();
        Ak = A_next;
        Gk = 0.5 * (G_next + G_next.transpose());
        Hk = 0.5 * (H_next + H_next.transpose());
        if (change <= 1e-14 * std::max(1.0, Hk.cwiseAbs().maxCoeff())) break;
    }

    GainSynthesis out;
    out.P = Hk;
    const MatrixXd BtPB = R + B0.transpose() * out.P * B0;
    out.K = -BtPB.llt().solve(B0.transpose() * out.P * A0);

    const MatrixXd residual = A0.transpose() * out.P * A0 - out.P + Q +
                              A0.transpose() * out.P * B0 * out.K;
    const double pscale = std::max(1.0, out.P.cwiseAbs().maxCoeff());
    if (!out.P.allFinite() || residual.cwiseAbs().maxCoeff() > 1e-8 * pscale)
        throw Error("Riccati iteration failed to converge");
    Eigen::EigenSolver<MatrixXd> cl(A0 + B0 * out.K);
    if (cl.eigenvalues().cwiseAbs().maxCoeff() >= 1.0 - 1e-12)
        throw Error("synthesized gain does not stabilize the nominal system");
    return out;
}

PredictionOperators build_prediction(const UncertainLtiSystem& sys, const MatrixXd& K,
                                     const std::vector<VectorXd>& w_seq, int T) {
    const int n = sys.n();
    const int m = sys.m();
    require(T >= 1, "horizon must be at least 1");
    require(static_cast<int>(w_seq.size()) == T, "need one disturbance per step");
    require(K.rows() == m && K.cols() == n, "K must be m x n");

    PredictionOperators ops;
    ops.n = n;
    ops.m = m;
    ops.T = T;
    ops.Phi = MatrixXd::Zero((T + 1) * n, n);
    ops.Gamma = MatrixXd::Zero((T + 1) * n, m * T);
    ops.d = VectorXd::Zero((T + 1) * n);
    ops.Phi.topRows(n) = MatrixXd::Identity(n, n);
    for (int l = 0; l < T; ++l) {
        const VectorXd& w = w_seq[static_cast<std::size_t>(l)];
        const MatrixXd Bw = sys.B(w);
        const MatrixXd Acl = sys.A(w) + Bw * K;
        ops.Phi.middleRows((l + 1) * n, n) = Acl * ops.Phi.middleRows(l * n, n);
        if (l > 0)
            ops.Gamma.block((l + 1) * n, 0, n, m * l) =
                Acl * ops.Gamma.block(l * n, 0, n, m * l);
        ops.Gamma.block((l + 1) * n, l * m, n, m) = Bw;
        ops.d.segment((l + 1) * n, n) = Acl * ops.d.segment(l * n, n) + sys.a(w);
    }
    return ops;
}

Eigen::MatrixXd estimate_cost_matrix(const SmpcProblem& prob, int n_cost,
                                     const uncertainty::SampleStream& stream) {
    require(n_cost >= 1000, "cost estimation needs at least 1000 sequences");
    const int n = prob.system.n();
    const int m = prob.system.m();
    const int T = prob.T;
    const int nw = prob.system.n_w();
    const int dim = n + m * T + 1;
    const uncertainty::DistributionSpec seq_spec =
        sequence_distribution(prob.system.disturbance(), T);

    MatrixXd S = MatrixXd::Zero(dim, dim);
    MatrixXd Tx((T + 1) * n, dim);   // [x_0; ...; x_T] = Tx [x; v; 1]
    MatrixXd Tu(m * T, dim);         // [u_0; ...; u_{T-1}] = Tu [x; v; 1]
    MatrixXd WTx((T + 1) * n, dim);  // blockdiag(Q,...,Q,P) Tx
    MatrixXd WTu(m * T, dim);        // blockdiag(R,...,R) Tu
    for (int i = 0; i < n_cost; ++i) {
        auto engine = stream.engine_at(static_cast<std::uint64_t>(i));
        const VectorXd q = seq_spec.sample(engine);
        const auto ops = build_prediction(prob.system, prob.K, split_sequence(q, nw, T), T);

        Tx << ops.Phi, ops.Gamma, ops.d;
        for (int l = 0; l < T; ++l) {
            Tu.middleRows(l * m, m) = prob.K * Tx.middleRows(l * n, n);
            Tu.block(l * m, n + l * m, m, m) += MatrixXd::Identity(m, m);
        }
        for (int l = 0; l < T; ++l) WTx.middleRows(l * n, n) = prob.Q * Tx.middleRows(l * n, n);
        WTx.bottomRows(n) = prob.P_terminal * Tx.bottomRows(n);
        for (int l = 0; l < T; ++l) WTu.middleRows(l * m, m) = prob.R * Tu.middleRows(l * m, m);
        S += Tx.transpose() * WTx + Tu.transpose() * WTu;
    }
    S /= static_cast<double>(n_cost);
    return 0.5 * (S + S.transpose());
}

ConstraintRow constraint_row(const SmpcProblem& prob, const std::vector<VectorXd>& w_seq, int l,
                             int j) {
    const auto ops = build_prediction(prob.system, prob.K, w_seq, prob.T);
    return row_from_ops(prob, ops, l, j);
}

ConstraintMatrix build_os_constraints(const SmpcProblem& prob,
                                      const uncertainty::SampleStream& stream) {
    const int n = prob.system.n();
    const int m = prob.system.m();
    const int T = prob.T;
    const int nw = prob.system.n_w();
    const int p = prob.p();
    const uncertainty::DistributionSpec seq_spec =
        sequence_distribution(prob.system.disturbance(), T);

    std::vector<long long> counts(static_cast<std::size_t>(p));
    long long total = 0;
    for (int j = 0; j < p; ++j) {
        const long long nj =
            scaling::learning_sample_size(n + m * T, prob.eps[j], prob.delta, 1);
        counts[static_cast<std::size_t>(j)] = nj * T;
        total += nj * T;
    }

    ConstraintMatrix cm;
    cm.rows_per_constraint = counts;
    cm.F.resize(total, n + m * T);
    cm.g.resize(total);
    cm.provenance.reserve(static_cast<std::size_t>(total));

    long long row = 0;
    for (int j = 0; j < p; ++j) {
        const long long nj = counts[static_cast<std::size_t>(j)] / T;
        const auto stream_j = stream.substream(static_cast<std::uint64_t>(j));
        const bool pure_input = prob.pure_input_row(j);
        const int l_first = pure_input ? 0 : 1;
        for (long long i = 0; i < nj; ++i) {
            auto engine = stream_j.engine_at(static_cast<std::uint64_t>(i));
            const VectorXd q = seq_spec.sample(engine);
            const auto ops =
                build_prediction(prob.system, prob.K, split_sequence(q, nw, T), T);
            for (int l = l_first; l < l_first + T; ++l) {
                const auto cr = row_from_ops(prob, ops, l, j);
                cm.F.row(row) = cr.f;
                cm.g[row] = cr.rhs;
                cm.provenance.push_back({i, l, j});
                ++row;
            }
        }
    }
    return cm;
}

uncertainty::DistributionSpec sequence_distribution(const uncertainty::DistributionSpec& step,
                                                    int horizon) {
    require(horizon >= 1, "horizon must be at least 1");
    std::vector<uncertainty::DistributionBlock> blocks;
    blocks.reserve(step.blocks().size() * static_cast<std::size_t>(horizon));
    for (int l = 0; l < horizon; ++l)
        for (const auto& b : step.blocks()) blocks.push_back(b);
    return uncertainty::DistributionSpec(std::move(blocks));
}

uncertainty::UncertainConstraintSystem trajectory_constraint_system(const SmpcProblem& prob) {
    const int n = prob.system.n();
    const int m = prob.system.m();
    const int T = prob.T;
    const int nw = prob.system.n_w();
    const int p = prob.p();
    return uncertainty::UncertainConstraintSystem::callback(
        n + m * T, p * T, [prob, n, m, T, nw, p](const VectorXd& q) {
            uncertainty::Realization real;
            real.F.resize(p * T, n + m * T);
            real.g.resize(p * T);
            const auto ops = build_prediction(prob.system, prob.K, split_sequence(q, nw, T), T);
            Eigen::Index row = 0;
            for (int j = 0; j < p; ++j) {
                const int l_first = prob.pure_input_row(j) ? 0 : 1;
                for (int l = l_first; l < l_first + T; ++l) {
                    const auto cr = row_from_ops(prob, ops, l, j);
                    real.F.row(row) = cr.f;
                    real.g[row] = cr.rhs;
                    ++row;
                }
            }
            return real;
        });
}

OnlineConstraints make_online(const ConstraintMatrix& cm, const SmpcProblem& prob) {
    OnlineConstraints oc;
    oc.kind = "os";
    oc.n = prob.system.n();
    oc.m = prob.system.m();
    oc.T = prob.T;
    oc.extra = 0;
    const auto split = split_columns(cm.F, oc.n);
    oc.F_x = split.F_x;
    oc.F_vz = split.F_vz;
    oc.g = cm.g;
    oc.online_count = cm.total_rows();
    oc.rows_per_constraint = cm.rows_per_constraint;
    return oc;
}

OnlineConstraints build_ps_constraints(const SmpcProblem& prob, int n_design, SasKind kind,
                                       const scaling::ScalingConfig& cfg, double box_radius) {
    require(n_design >= 1, "need at least one design scenario");
    require(box_radius > 0, "operating box radius must be positive");
    const int n = prob.system.n();
    const int m = prob.system.m();
    const int T = prob.T;
    const int n_xi = n + m * T;

    OnlineConstraints oc;
    oc.n = n;
    oc.m = m;
    oc.T = T;
    oc.design_scenarios = n_design;
    oc.design_box_rows = 2 * n_xi;

    const uncertainty::DistributionSpec seq_spec =
        sequence_distribution(prob.system.disturbance(), T);
    const auto sys = trajectory_constraint_system(prob);

    // Design scenarios come from substream 2 of the base stream; the scaling
    // step internally uses substreams 0 (scenarios) and 1 (center check) of
    // the same base, so the three sample sets never collide.
    uncertainty::ScenarioSet design;
    try {
        const auto design_stream = uncertainty::SampleStream{cfg.seed, 0}.substream(2);
        design = uncertainty::realize_scenarios(sys, seq_spec, design_stream, n_design);
    } catch (const std::exception& e) {
        throw PipelineError("design-sampling", e.what());
    }
    oc.design_rows = static_cast<long long>(n_design) * sys.rows();

    scaling::SasCandidate candidate{
        sas::NormSAS(VectorXd::Zero(1), MatrixXd::Identity(1, 1), sas::NormOrder::L1)};
    try {
        if (kind == SasKind::Sampled) {
            candidate = sas::design_sampled_poly(design, box_radius);
        } else {
            candidate = sas::design_norm_sas(
                sas::stacked_design_polytope(design, box_radius),
                kind == SasKind::L1 ? sas::NormOrder::L1 : sas::NormOrder::Linf);
        }
    } catch (const std::exception& e) {
        throw PipelineError("sas-design", e.what());
    }

    scaling::ScaledSAS scaled(candidate, 0.0);
    try {
        scaled = scaling::probabilistic_scale(candidate, sys, seq_spec, cfg);
    } catch (const std::exception& e) {
        throw PipelineError("scaling", e.what());
    }
    oc.gamma = scaled.gamma;
    oc.scaling_diagnostics = scaled.diagnostics;

    try {
        if (kind == SasKind::Sampled) {
            const auto& samp = std::get<sas::SampledSAS>(scaled.candidate);
            const polytope::HPolytope grown = polytope::scale_about(samp.poly, scaled.gamma);
            oc.kind = "sampled";
            oc.extra = 0;
            const auto split = split_columns(grown.A(), n);
            oc.F_x = split.F_x;
            oc.F_vz = split.F_vz;
            oc.g = grown.b();
        } else {
            const auto& ball = std::get<sas::NormSAS>(scaled.candidate);
            const sas::NormSAS grown = sas::scaled(ball, scaled.gamma);
            if (kind == SasKind::L1) {
                const auto lifted = sas::lift_l1(grown).lifted_polytope();
                oc.kind = "l1";
                oc.extra = n_xi;  // one slack per l1 coordinate
                oc.F_x = lifted.A().leftCols(n);
                oc.F_vz = lifted.A().rightCols(m * T + n_xi);
                oc.g = lifted.b();
            } else {
                const auto hrep = sas::hrep_linf(grown);
                oc.kind = "linf";
                oc.extra = 0;
                const auto split = split_columns(hrep.A(), n);
                oc.F_x = split.F_x;
                oc.F_vz = split.F_vz;
                oc.g = hrep.b();
            }
        }
    } catch (const std::exception& e) {
        throw PipelineError("emit", e.what());
    }
    oc.online_count = static_cast<long long>(oc.g.size());
    return oc;
}

MpcStepResult mpc_step(const VectorXd& x, const MatrixXd& S_tilde, const OnlineConstraints& oc,
                       const MatrixXd& K) {
    const int n = oc.n;
    const int mT = oc.m * oc.T;
    const int nv = mT + oc.extra;
    require(x.size() == n, "state dimension mismatch");
    require(S_tilde.rows() == n + mT + 1 && S_tilde.cols() == S_tilde.rows(),
            "cost matrix must be (n + mT + 1) square");
    require(K.rows() == oc.m && K.cols() == n, "K must be m x n");

    optim::QuadraticProgram qp;
    qp.H = MatrixXd::Zero(nv, nv);
    qp.H.topLeftCorner(mT, mT) = 2.0 * S_tilde.block(n, n, mT, mT);
    if (oc.extra > 0) {
        // Slack coordinates are cost-free; a tiny curvature keeps the
        // Hessian invertible on the working-set subspaces without moving the
        // argmin in v by more than solver tolerance.
        double reg = 1e-8 * qp.H.topLeftCorner(mT, mT).diagonal().mean();
        if (!(reg > 0)) reg = 1e-8;
        qp.H.bottomRightCorner(oc.extra, oc.extra) = reg * MatrixXd::Identity(oc.extra, oc.extra);
    }
    qp.f = VectorXd::Zero(nv);
    qp.f.head(mT) = 2.0 * (S_tilde.block(n, 0, mT, n) * x + S_tilde.block(n, n + mT, mT, 1));
    qp.A = oc.F_vz;
    qp.b = oc.g - oc.F_x * x;

    const auto t0 = std::chrono::steady_clock::now();
    const auto res = optim::solve_qp(qp);
    const auto t1 = std::chrono::steady_clock::now();

    MpcStepResult out;
    out.solve_time_s = std::chrono::duration<double>(t1 - t0).count();
    out.status = res.status;
    if (res.status == optim::SolveStatus::Optimal) {
        out.v = res.x.head(mT);
    } else {
        out.v = VectorXd::Zero(mT);
        out.fallback = true;
        out.note = std::string("qp ") + status_name(res.status) + "; applied v = 0";
    }
    out.u0 = K * x + out.v.head(oc.m);
    VectorXd xv1(n + mT + 1);
    xv1 << x, out.v, 1.0;
    out.objective = xv1.dot(S_tilde * xv1);
    return out;
}

TrajectoryRecord simulate_closed_loop(const SmpcProblem& prob, const MatrixXd& S_tilde,
                                      const OnlineConstraints& oc, int steps, const VectorXd& x0,
                                      const uncertainty::SampleStream& stream,
                                      bool record_timing) {
    require(steps >= 1, "need at least one step");
    require(x0.size() == prob.system.n(), "initial state dimension mismatch");

    TrajectoryRecord rec;
    rec.steps.reserve(static_cast<std::size_t>(steps));
    VectorXd x = x0;
    double time_sum = 0.0;
    for (int k = 0; k < steps; ++k) {
        const auto step = mpc_step(x, S_tilde, oc, prob.K);
        StepRecord sr;
        sr.x = x;
        sr.u = step.u0;
        sr.v = step.v;
        sr.solve_time_s = record_timing ? step.solve_time_s : 0.0;
        sr.feasible = !step.fallback;
        const VectorXd slack = prob.Hx * x + prob.Hu * step.u0;
        sr.violated = (slack.array() > 1.0).any() ? 1 : 0;
        if (step.fallback) ++rec.fallback_count;
        if (k >= 1 && sr.violated) ++rec.violation_count;
        rec.max_solve_time_s = std::max(rec.max_solve_time_s, sr.solve_time_s);
        time_sum += sr.solve_time_s;
        rec.steps.push_back(std::move(sr));

        auto engine = stream.engine_at(static_cast<std::uint64_t>(k));
        const VectorXd w = prob.system.disturbance().sample(engine);
        x = prob.system.A(w) * x + prob.system.B(w) * step.u0 + prob.system.a(w);
    }
    rec.avg_solve_time_s = time_sum / static_cast<double>(steps);
    rec.violation_rate =
        steps > 1 ? static_cast<double>(rec.violation_count) / static_cast<double>(steps - 1)
                  : 0.0;
    return rec;
}

SmpcProblem make_benchmark_problem(int n, int m, int T, double eps, double delta, double kappa_a,
                                   double kappa_b, double kappa_w) {
    return make_benchmark_problem(
        n, m, T, eps, delta, kappa_a, kappa_b, kappa_w,
        uncertainty::DistributionSpec({uncertainty::UniformBoxBlock{
            VectorXd::Constant(3, -1.0), VectorXd::Constant(3, 1.0)}}));
}

SmpcProblem make_benchmark_problem(int n, int m, int T, double eps, double delta, double kappa_a,
                                   double kappa_b, double kappa_w,
                                   const uncertainty::DistributionSpec& disturbance) {
    require(n >= 1 && m >= 1 && m <= n, "need 1 <= m <= n");
    require(T >= 1, "horizon must be at least 1");
    require(disturbance.dimension() == 3,
            "the benchmark disturbance must have exactly three coordinates");

    MatrixXd A0 = MatrixXd::Identity(n, n);
    for (int i = 0; i + 1 < n; ++i) A0(i, i + 1) = 1.0;
    MatrixXd B0 = MatrixXd::Zero(n, m);
    B0.bottomRows(m) = MatrixXd::Identity(m, m);

    std::vector<MatrixXd> Ai{kappa_a * A0, MatrixXd::Zero(n, n), MatrixXd::Zero(n, n)};
    std::vector<MatrixXd> Bi{MatrixXd::Zero(n, m), kappa_b * B0, MatrixXd::Zero(n, m)};
    std::vector<VectorXd> ai{VectorXd::Zero(n), VectorXd::Zero(n),
                             kappa_w * VectorXd::Unit(n, n - 1)};

    UncertainLtiSystem sys(A0, std::move(Ai), B0, std::move(Bi), std::move(ai), disturbance);

    const MatrixXd Q = MatrixXd::Identity(n, n);
    const MatrixXd R = MatrixXd::Identity(m, m);
    const auto gain = synthesize_prestabilizer(A0, B0, Q, R);

    // Two-sided bounds |x_1| <= 5 and |u_1| <= 5 as four one-sided rows;
    // the symmetry keeps the designed approximating sets centered near the
    // operating trajectory.
    MatrixXd Hx = MatrixXd::Zero(4, n);
    Hx(0, 0) = 1.0 / 5.0;
    Hx(1, 0) = -1.0 / 5.0;
    MatrixXd Hu = MatrixXd::Zero(4, m);
    Hu(2, 0) = 1.0 / 5.0;
    Hu(3, 0) = -1.0 / 5.0;

    return SmpcProblem(std::move(sys), T, Q, R, gain.P, gain.K, std::move(Hx), std::move(Hu),
                       VectorXd::Constant(4, eps), delta);
}

}  // namespace psmpc::smpc

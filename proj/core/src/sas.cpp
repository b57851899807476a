#include "psmpc/sas.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "psmpc/errors.hpp"
#include "psmpc/optim.hpp"

namespace psmpc::sas {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kConditionLimit = 1e12;

// Inverse of the shape matrix via SVD with an explicit condition guard.
MatrixXd invert_shape(const MatrixXd& P) {
    Eigen::JacobiSVD<MatrixXd> svd(P, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.maxCoeff();
    const double smin = sv.minCoeff();
    if (smin <= 0.0 || smax / smin > kConditionLimit)
        throw SingularShapeError("shape matrix is singular or too ill-conditioned to invert");
    return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

double dual_norm(const VectorXd& v, NormOrder order) {
    // p = 1 pairs with the max norm, p = inf with the sum norm.
    return order == NormOrder::L1 ? v.lpNorm<Eigen::Infinity>() : v.lpNorm<1>();
}

}  // namespace

NormSAS::NormSAS(VectorXd center, MatrixXd shape, NormOrder order)
    : center_(std::move(center)), shape_(std::move(shape)), order_(order) {
    const auto n = center_.size();
    if (n < 1) throw std::invalid_argument("NormSAS: empty center");
    if (shape_.rows() != n || shape_.cols() != n)
        throw std::invalid_argument("NormSAS: shape matrix dimension mismatch");
    if (!center_.allFinite() || !shape_.allFinite())
        throw std::invalid_argument("NormSAS: entries must be finite");
    const double scale = std::max(1.0, shape_.cwiseAbs().maxCoeff());
    if ((shape_ - shape_.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument("NormSAS: shape matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (shape_ + shape_.transpose()),
                                               Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::invalid_argument("NormSAS: eigendecomposition of the shape matrix failed");
    if (es.eigenvalues().minCoeff() < -1e-8 * shape_.cwiseAbs().maxCoeff())
        throw std::invalid_argument("NormSAS: shape matrix must be positive semidefinite");
}

NormSAS scaled(const NormSAS& s, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("scaled: gamma must be nonnegative");
    return NormSAS(s.center(), gamma * s.shape(), s.order());
}

polytope::HPolytope LiftedL1Rep::lifted_polytope() const {
    const int n = dimension();
    MatrixXd A = MatrixXd::Zero(3 * n + 1, 2 * n);
    VectorXd b(3 * n + 1);
    for (int i = 0; i < n; ++i) {
        A.block(i, 0, 1, n) = M.row(i);
        A(i, n + i) = -1.0;
        b(i) = c(i);
        A.block(n + i, 0, 1, n) = -M.row(i);
        A(n + i, n + i) = -1.0;
        b(n + i) = -c(i);
        A(2 * n + i, n + i) = -1.0;
        b(2 * n + i) = 0.0;
    }
    A.block(3 * n, n, 1, n).setOnes();
    b(3 * n) = 1.0;
    return polytope::HPolytope(std::move(A), std::move(b));
}

double sas_support(const NormSAS& s, const VectorXd& f) {
    if (f.size() != s.dimension())
        throw std::invalid_argument("sas_support: direction dimension mismatch");
    return f.dot(s.center()) + dual_norm(s.shape() * f, s.order());
}

std::vector<VectorXd> sas_vertices(const NormSAS& s) {
    const int n = s.dimension();
    std::vector<VectorXd> verts;
    if (s.order() == NormOrder::L1) {
        verts.reserve(static_cast<std::size_t>(2 * n));
        for (int i = 0; i < n; ++i) {
            verts.push_back(s.center() + s.shape().col(i));
            verts.push_back(s.center() - s.shape().col(i));
        }
    } else {
        if (n > 20)
            throw std::invalid_argument(
                "sas_vertices: 2^n vertex enumeration limited to dimensions <= 20");
        verts.reserve(std::size_t{1} << n);
        VectorXd z = VectorXd::Constant(n, -1.0);
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
            for (int i = 0; i < n; ++i) z(i) = (mask >> i) & 1 ? 1.0 : -1.0;
            verts.push_back(s.center() + s.shape() * z);
        }
    }
    return verts;
}

bool sas_membership(const NormSAS& s, const VectorXd& xi) {
    if (xi.size() != s.dimension())
        throw std::invalid_argument("sas_membership: point dimension mismatch");
    const MatrixXd M = invert_shape(s.shape());
    const VectorXd z = M * (xi - s.center());
    const double norm = s.order() == NormOrder::L1 ? z.lpNorm<1>() : z.lpNorm<Eigen::Infinity>();
    return norm <= 1.0 + 1e-9;
}

LiftedL1Rep lift_l1(const NormSAS& s) {
    if (s.order() != NormOrder::L1)
        throw std::invalid_argument("lift_l1: only the l1-ball SAS has this representation");
    LiftedL1Rep rep;
    rep.M = invert_shape(s.shape());
    rep.c = rep.M * s.center();
    return rep;
}

polytope::HPolytope hrep_linf(const NormSAS& s) {
    if (s.order() != NormOrder::Linf)
        throw std::invalid_argument("hrep_linf: only the linf-ball SAS has this representation");
    const MatrixXd M = invert_shape(s.shape());
    const int n = s.dimension();
    MatrixXd A(2 * n, n);
    VectorXd b(2 * n);
    const VectorXd Mx = M * s.center();
    for (int i = 0; i < n; ++i) {
        A.row(i) = M.row(i);
        b(i) = 1.0 + Mx(i);
        A.row(n + i) = -M.row(i);
        b(n + i) = 1.0 - Mx(i);
    }
    return polytope::HPolytope(std::move(A), std::move(b));
}

namespace {

polytope::HPolytope stacked_design_polytope_impl(const uncertainty::ScenarioSet& scen,
                                                 const double* box_radius) {
    if (scen.scenarios.empty())
        throw std::invalid_argument("stacked_design_polytope: no scenarios");
    const int n = scen.dimension;
    const int p = scen.rows_per_scenario;
    const int N = static_cast<int>(scen.scenarios.size());
    const int scenario_rows = N * p;
    const int box_rows = box_radius != nullptr ? 2 * n : 0;
    MatrixXd A(scenario_rows + box_rows, n);
    VectorXd b(scenario_rows + box_rows);
    for (int i = 0; i < N; ++i) {
        const auto& r = scen.scenarios[static_cast<std::size_t>(i)];
        A.middleRows(i * p, p) = r.F;
        b.segment(i * p, p) = r.g;
    }
    if (box_radius != nullptr) {
        if (!(*box_radius > 0.0))
            throw std::invalid_argument("stacked_design_polytope: box radius must be positive");
        A.bottomRows(box_rows).setZero();
        for (int j = 0; j < n; ++j) {
            A(scenario_rows + 2 * j, j) = 1.0;
            A(scenario_rows + 2 * j + 1, j) = -1.0;
        }
        b.tail(box_rows).setConstant(*box_radius);
    }
    return polytope::HPolytope(std::move(A), std::move(b));
}

SampledSAS design_sampled_poly_impl(const uncertainty::ScenarioSet& scen, const double* box_radius) {
    const int p = scen.rows_per_scenario;
    const int N = static_cast<int>(scen.scenarios.size());
    const int scenario_rows = N * p;
    polytope::HPolytope poly = stacked_design_polytope_impl(scen, box_radius);
    auto ball = polytope::chebyshev_center(poly);  // throws on empty / unbounded
    if (ball.radius <= 1e-9)
        throw EmptySetError("design_sampled_poly: scenario intersection has empty interior");
    SampledSAS out{polytope::CenteredPolytope(std::move(poly), ball.center), N, p, scenario_rows};
    return out;
}

}  // namespace

polytope::HPolytope stacked_design_polytope(const uncertainty::ScenarioSet& scen) {
    return stacked_design_polytope_impl(scen, nullptr);
}

polytope::HPolytope stacked_design_polytope(const uncertainty::ScenarioSet& scen,
                                            double box_radius) {
    return stacked_design_polytope_impl(scen, &box_radius);
}

SampledSAS design_sampled_poly(const uncertainty::ScenarioSet& scen) {
    return design_sampled_poly_impl(scen, nullptr);
}

SampledSAS design_sampled_poly(const uncertainty::ScenarioSet& scen, double box_radius) {
    return design_sampled_poly_impl(scen, &box_radius);
}

NormSAS design_norm_sas(const polytope::HPolytope& D, NormOrder order, ShapeMode mode) {
    if (mode == ShapeMode::FullShape)
        throw NotSupportedError(
            "design_norm_sas: the full symmetric-shape design is a semidefinite program; only "
            "the diagonal-shape linear program is supported");
    const int n = D.dimension();
    // Boundedness probe along every axis; also yields the extent used for the
    // minimum-size floor on the diagonal of P.  Rows with a single nonzero
    // coefficient (explicit box rows) give the bound directly; axis-aligned
    // support objectives are so degenerate on large scenario stacks that the
    // simplex probe is far more expensive than the design program itself.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    VectorXd axis_hi = VectorXd::Constant(n, kInf);
    VectorXd axis_lo = VectorXd::Constant(n, -kInf);
    for (int i = 0; i < D.rows(); ++i) {
        const Eigen::RowVectorXd f = D.A().row(i);
        int nz = -1;
        bool single = true;
        for (int j = 0; j < n; ++j) {
            if (f(j) == 0.0) continue;
            if (nz >= 0) {
                single = false;
                break;
            }
            nz = j;
        }
        if (!single || nz < 0) continue;
        const double bound = D.b()(i) / f(nz);
        if (f(nz) > 0.0)
            axis_hi(nz) = std::min(axis_hi(nz), bound);
        else
            axis_lo(nz) = std::max(axis_lo(nz), bound);
    }
    double max_width = 0.0;
    for (int j = 0; j < n; ++j) {
        double hi = axis_hi(j);
        double lo = axis_lo(j);
        if (!std::isfinite(hi)) {
            VectorXd e = VectorXd::Zero(n);
            e(j) = 1.0;
            auto s = polytope::support(D, e);
            if (!s.bounded)
                throw UnboundedSetError("design_norm_sas: D is unbounded along an axis");
            hi = s.value;
        }
        if (!std::isfinite(lo)) {
            VectorXd e = VectorXd::Zero(n);
            e(j) = -1.0;
            auto s = polytope::support(D, e);
            if (!s.bounded)
                throw UnboundedSetError("design_norm_sas: D is unbounded along an axis");
            lo = -s.value;
        }
        max_width = std::max(max_width, hi - lo);
    }
    if (max_width <= 0.0)
        throw EmptySetError("design_norm_sas: D has no extent to inscribe into");
    const double mu = 1e-6 * 0.5 * max_width;

    // Variables (x_c, d) with P = diag(d); containment of x_c + P B_p in D is
    // f_i' x_c + ||P f_i||_q <= g_i, which for diagonal P linearizes to
    //   q = inf:  f_i' x_c + d_j |f_ij| <= g_i  for every i and nonzero j,
    //   q = 1:    f_i' x_c + sum_j d_j |f_ij| <= g_i  for every i.
    const int m = D.rows();
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    rows.reserve(static_cast<std::size_t>(m) * (order == NormOrder::L1 ? n : 1));
    for (int i = 0; i < m; ++i) {
        const Eigen::RowVectorXd f = D.A().row(i);
        if (order == NormOrder::L1) {
            for (int j = 0; j < n; ++j) {
                if (f(j) == 0.0) continue;
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * n);
                row.head(n) = f;
                row(n + j) = std::abs(f(j));
                rows.push_back(std::move(row));
                rhs.push_back(D.b()(i));
            }
        } else {
            Eigen::RowVectorXd row(2 * n);
            row.head(n) = f;
            row.tail(n) = f.cwiseAbs();
            rows.push_back(std::move(row));
            rhs.push_back(D.b()(i));
        }
    }

    optim::LinearProgram lp;
    lp.c = VectorXd::Zero(2 * n);
    lp.c.tail(n).setOnes();  // maximize trace of P
    lp.maximize = true;
    lp.A.resize(static_cast<Eigen::Index>(rows.size()), 2 * n);
    lp.b.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        lp.A.row(static_cast<Eigen::Index>(i)) = rows[i];
        lp.b(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    lp.lower = VectorXd::Constant(2 * n, -std::numeric_limits<double>::infinity());
    lp.lower.tail(n).setConstant(mu);

    auto res = optim::solve_lp(lp);
    if (res.status == optim::SolveStatus::Infeasible)
        throw EmptySetError("design_norm_sas: no inscribed set meets the minimum-size floor");
    if (res.status != optim::SolveStatus::Optimal)
        throw Error("design_norm_sas: design linear program failed: " + res.note);
    VectorXd x_c = res.x.head(n);
    MatrixXd P = res.x.tail(n).asDiagonal();
    return NormSAS(std::move(x_c), std::move(P), order);
}

}  // namespace psmpc::sas

#include "psmpc/polytope.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "psmpc/errors.hpp"
#include "psmpc/optim.hpp"

namespace psmpc::polytope {

using Eigen::MatrixXd;
using Eigen::VectorXd;

HPolytope::HPolytope(MatrixXd A, VectorXd b) {
    if (A.rows() < 1 || A.cols() < 1)
        throw std::invalid_argument("HPolytope: need at least one row and one column");
    if (b.size() != A.rows()) throw std::invalid_argument("HPolytope: A/b row mismatch");
    if (!A.allFinite() || !b.allFinite())
        throw std::invalid_argument("HPolytope: entries must be finite");
    dim_ = static_cast<int>(A.cols());
    std::vector<int> keep;
    keep.reserve(static_cast<std::size_t>(A.rows()));
    for (int i = 0; i < A.rows(); ++i) {
        if (A.row(i).cwiseAbs().maxCoeff() == 0.0) {
            if (b(i) < 0.0) marked_empty_ = true;
            continue;  // vacuous row either way
        }
        keep.push_back(i);
    }
    A_.resize(static_cast<Eigen::Index>(keep.size()), dim_);
    b_.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        A_.row(static_cast<Eigen::Index>(k)) = A.row(keep[k]);
        b_(static_cast<Eigen::Index>(k)) = b(keep[k]);
    }
}

bool HPolytope::contains(const VectorXd& xi, double tol) const {
    if (xi.size() != dim_) throw std::invalid_argument("HPolytope::contains: dimension mismatch");
    if (marked_empty_) return false;
    if (A_.rows() == 0) return true;
    return ((A_ * xi - b_).array() <= tol).all();
}

CenteredPolytope::CenteredPolytope(HPolytope poly, VectorXd center, double center_tol)
    : poly_(std::move(poly)), center_(std::move(center)) {
    if (center_.size() != poly_.dimension())
        throw std::invalid_argument("CenteredPolytope: center dimension mismatch");
    if (poly_.marked_empty())
        throw std::invalid_argument("CenteredPolytope: polytope is empty");
    if (poly_.rows() > 0) {
        const double min_slack = (poly_.b() - poly_.A() * center_).minCoeff();
        if (!(min_slack >= center_tol))
            throw std::invalid_argument("CenteredPolytope: center is not strictly interior");
    }
}

SupportValue support(const HPolytope& poly, const VectorXd& f) {
    if (f.size() != poly.dimension())
        throw std::invalid_argument("support: direction dimension mismatch");
    if (poly.marked_empty()) throw EmptySetError("support: polytope is empty");
    if (poly.rows() == 0) {
        // No constraints: bounded only in the zero direction.
        if (f.cwiseAbs().maxCoeff() == 0.0) return {true, 0.0};
        return {false, std::numeric_limits<double>::infinity()};
    }
    optim::LinearProgram lp;
    lp.c = f;
    lp.maximize = true;
    lp.A = poly.A();
    lp.b = poly.b();
    auto res = optim::solve_lp(lp);
    switch (res.status) {
        case optim::SolveStatus::Optimal:
            return {true, res.objective};
        case optim::SolveStatus::Unbounded:
            return {false, std::numeric_limits<double>::infinity()};
        case optim::SolveStatus::Infeasible:
            throw EmptySetError("support: polytope is empty");
        default:
            throw Error("support: linear program solver failed: " + res.note);
    }
}

ChebyshevBall chebyshev_center(const HPolytope& poly) {
    if (poly.marked_empty()) throw EmptySetError("chebyshev_center: polytope is empty");
    const int n = poly.dimension();
    const int m = poly.rows();
    if (m == 0) throw UnboundedSetError("chebyshev_center: radius is unbounded");
    // Variables (x, r); maximize r subject to a_i'x + r ||a_i|| <= b_i.
    optim::LinearProgram lp;
    lp.c = VectorXd::Zero(n + 1);
    lp.c(n) = 1.0;
    lp.maximize = true;
    lp.A.resize(m, n + 1);
    lp.A.leftCols(n) = poly.A();
    for (int i = 0; i < m; ++i) lp.A(i, n) = poly.A().row(i).norm();
    lp.b = poly.b();
    auto res = optim::solve_lp(lp);
    if (res.status == optim::SolveStatus::Unbounded)
        throw UnboundedSetError("chebyshev_center: radius is unbounded");
    if (res.status != optim::SolveStatus::Optimal)
        throw Error("chebyshev_center: linear program solver failed: " + res.note);
    const double r = res.x(n);
    if (r < -1e-12 * (1.0 + poly.b().cwiseAbs().maxCoeff()))
        throw EmptySetError("chebyshev_center: polytope is empty");
    ChebyshevBall ball;
    ball.center = res.x.head(n);
    ball.radius = std::max(r, 0.0);
    return ball;
}

HPolytope scale_about(const CenteredPolytope& cp, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("scale_about: gamma must be nonnegative");
    const auto& P = cp.poly();
    VectorXd b_scaled = gamma * P.b() + (1.0 - gamma) * (P.A() * cp.center());
    return HPolytope(P.A(), std::move(b_scaled));
}

VolumeEstimate mc_volume(const std::function<bool(const VectorXd&)>& membership,
                         const VectorXd& box_lower, const VectorXd& box_upper, int N,
                         const uncertainty::SampleStream& stream) {
    if (N < 100) throw std::invalid_argument("mc_volume: need at least 100 samples");
    if (!membership) throw std::invalid_argument("mc_volume: empty membership predicate");
    const auto n = box_lower.size();
    if (n < 1 || box_upper.size() != n)
        throw std::invalid_argument("mc_volume: box dimension mismatch");
    if (((box_upper - box_lower).array() < 0.0).any())
        throw std::invalid_argument("mc_volume: box needs lower <= upper");
    double box_volume = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) box_volume *= box_upper(j) - box_lower(j);

    long long hits = 0;
    VectorXd point(n);
    for (int i = 0; i < N; ++i) {
        uncertainty::RngEngine engine = stream.engine_at(static_cast<std::uint64_t>(i));
        for (Eigen::Index j = 0; j < n; ++j)
            point(j) = engine.uniform(box_lower(j), box_upper(j));
        if (membership(point)) ++hits;
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(N);
    VolumeEstimate est;
    est.volume = frac * box_volume;
    est.std_error = box_volume * std::sqrt(frac * (1.0 - frac) / static_cast<double>(N));
    est.hits = hits;
    est.samples = N;
    return est;
}

}  // namespace psmpc::polytope

// Half-space polytope geometry: support functions, Chebyshev centers,
// scaling about an interior point, and Monte Carlo volume estimation.
#pragma once

#include <Eigen/Dense>
#include <functional>

#include "psmpc/uncertainty.hpp"

namespace psmpc::polytope {

/// Polytope in H-representation {xi : A xi <= b}.  Construction drops rows
/// with an exactly zero normal when their right-hand side is nonnegative
/// (vacuous constraints) and records structural emptiness when such a row has
/// a negative right-hand side (0'xi <= b < 0 is unsatisfiable).
class HPolytope {
 public:
    HPolytope(Eigen::MatrixXd A, Eigen::VectorXd b);

    [[nodiscard]] int dimension() const { return dim_; }
    [[nodiscard]] int rows() const { return static_cast<int>(A_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& A() const { return A_; }
    [[nodiscard]] const Eigen::VectorXd& b() const { return b_; }
    /// True when construction proved the set empty from a zero-normal row.
    [[nodiscard]] bool marked_empty() const { return marked_empty_; }
    /// Componentwise A xi <= b + tol.
    [[nodiscard]] bool contains(const Eigen::VectorXd& xi, double tol = 0.0) const;

 private:
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    int dim_ = 0;
    bool marked_empty_ = false;
};

/// Polytope with a strictly interior scaling center (slack >= center_tol on
/// every row).  Throws std::invalid_argument when the center is not strictly
/// feasible.
class CenteredPolytope {
 public:
    CenteredPolytope(HPolytope poly, Eigen::VectorXd center, double center_tol = 1e-9);

    [[nodiscard]] const HPolytope& poly() const { return poly_; }
    [[nodiscard]] const Eigen::VectorXd& center() const { return center_; }

 private:
    HPolytope poly_;
    Eigen::VectorXd center_;
};

/// Value of sup{f' xi : xi in poly}; `bounded` is false (value +inf) when the
/// polytope is unbounded in direction f.
struct SupportValue {
    bool bounded = true;
    double value = 0.0;
};

/// Support function via linear programming.
/// Throws EmptySetError when the polytope is empty.
SupportValue support(const HPolytope& poly, const Eigen::VectorXd& f);

struct ChebyshevBall {
    Eigen::VectorXd center;
    double radius = 0.0;
};

/// Center and radius of a largest inscribed ball (max r s.t.
/// a_i'x + r ||a_i|| <= b_i).  Throws EmptySetError for empty polytopes and
/// UnboundedSetError when the radius grows without bound.
ChebyshevBall chebyshev_center(const HPolytope& poly);

/// The set {center + gamma (s - center) : s in cp.poly()}, i.e.
/// {xi : A xi <= gamma b + (1-gamma) A center}.  Requires gamma >= 0.
HPolytope scale_about(const CenteredPolytope& cp, double gamma);

struct VolumeEstimate {
    double volume = 0.0;
    double std_error = 0.0;
    long long hits = 0;
    int samples = 0;
};

/// Hit-fraction Monte Carlo volume of the set defined by `membership` inside
/// the axis-aligned box [box_lower, box_upper].  Deterministic per stream.
/// Requires N >= 100 and box_lower <= box_upper componentwise.
VolumeEstimate mc_volume(const std::function<bool(const Eigen::VectorXd&)>& membership,
                         const Eigen::VectorXd& box_lower, const Eigen::VectorXd& box_upper, int N,
                         const uncertainty::SampleStream& stream);

}  // namespace psmpc::polytope
